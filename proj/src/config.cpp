#include <fstream>
#include <set>

#include "fairspread/error.hpp"
#include "fairspread/experiment.hpp"

namespace fairspread {

namespace {

using json = nlohmann::json;

void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error("config: " + where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw Error("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
std::vector<T> scalar_or_list(const json& j, const std::string& key) {
  try {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
  } catch (const json::exception& e) {
    throw Error("config: bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error("config: bad value for '" + key + "': " + e.what());
  }
}

Eigen::MatrixXd parse_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw Error("config: P must be a nonempty list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = get_as<std::vector<double>>(j[static_cast<std::size_t>(i)], "P");
    if (static_cast<Eigen::Index>(row.size()) != rows) throw Error("config: P must be square");
    for (Eigen::Index k = 0; k < rows; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

SyntheticSource parse_synthetic(const json& j) {
  require_keys(j, "source", {"type", "n", "pi", "P", "theta", "labels", "observed", "detect_K"});
  SyntheticSource s;
  if (!j.contains("pi") || !j.contains("P")) throw Error("config: synthetic source needs pi and P");
  s.n = j.value("n", std::size_t{1000});
  s.pi = get_as<std::vector<double>>(j["pi"], "pi");
  s.P = parse_matrix(j["P"]);
  if (j.contains("theta")) {
    if (j["theta"].is_array()) {
      s.theta.kind = ThetaSource::Kind::kExplicit;
      s.theta.values = get_as<std::vector<double>>(j["theta"], "theta");
    } else {
      s.theta = ThetaSource::parse(get_as<std::string>(j["theta"], "theta"));
    }
  }
  const std::string labels = j.value("labels", std::string("resample"));
  if (labels == "resample") {
    s.labels = LabelMode::kResample;
  } else if (labels == "fixed") {
    s.labels = LabelMode::kFixed;
  } else {
    throw Error("config: labels must be 'resample' or 'fixed'");
  }
  s.observed = j.value("observed", false);
  s.detect_K = j.value("detect_K", 0);
  return s;
}

EdgeListSource parse_edge_list(const json& j) {
  require_keys(j, "source", {"type", "edges", "labels", "K", "label_filter_top"});
  EdgeListSource e;
  if (!j.contains("edges")) throw Error("config: edge_list source needs 'edges'");
  e.edges = get_as<std::string>(j["edges"], "edges");
  e.labels = j.value("labels", std::string());
  e.K = j.value("K", 2);
  e.label_filter_top = j.value("label_filter_top", 0);
  return e;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  require_keys(j, "config",
               {"name", "source", "transmission", "t", "lambda", "budget", "strategies", "replications",
                "seed", "solver", "theta_tol", "real_theta_tol", "fit", "epsilon"});
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  if (!j.contains("source")) throw Error("config: missing 'source'");
  const json& src = j["source"];
  const std::string type = src.is_object() ? src.value("type", std::string("synthetic")) : "";
  if (type == "synthetic") {
    c.source = parse_synthetic(src);
  } else if (type == "edge_list") {
    c.source = parse_edge_list(src);
  } else {
    throw Error("config: source type must be 'synthetic' or 'edge_list'");
  }

  if (j.contains("transmission")) {
    const json& tr = j["transmission"];
    require_keys(tr, "transmission", {"beta", "within", "between"});
    const bool has_grid = tr.contains("within") || tr.contains("between");
    if (has_grid && tr.contains("beta")) throw Error("config: give either beta or within/between");
    if (has_grid) {
      if (!tr.contains("within") || !tr.contains("between")) {
        throw Error("config: within and between must both be given");
      }
      c.transmission.grid = true;
      c.transmission.within = scalar_or_list<double>(tr["within"], "within");
      c.transmission.between = scalar_or_list<double>(tr["between"], "between");
    } else if (tr.contains("beta")) {
      c.transmission.scalar = scalar_or_list<double>(tr["beta"], "beta");
    }
  }
  if (j.contains("t")) c.t = scalar_or_list<int>(j["t"], "t");
  if (j.contains("lambda")) c.lambda = scalar_or_list<double>(j["lambda"], "lambda");
  if (j.contains("budget")) {
    const json& b = j["budget"];
    c.budget = b.is_string() ? BudgetRule::parse(b.get<std::string>())
                             : BudgetRule::parse(std::to_string(get_as<long long>(b, "budget")));
  }
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& name : scalar_or_list<std::string>(j["strategies"], "strategies")) {
      c.strategies.push_back(parse_strategy(name));
    }
  }
  if (j.contains("replications")) {
    const long long r = get_as<long long>(j["replications"], "replications");
    if (r < 1) throw Error("config: replications must be at least 1");
    c.replications = static_cast<std::size_t>(r);
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    require_keys(s, "solver", {"restarts", "gtol", "max_iter"});
    c.solver.restarts = s.value("restarts", c.solver.restarts);
    c.solver.gtol = s.value("gtol", c.solver.gtol);
    c.solver.max_iter = s.value("max_iter", c.solver.max_iter);
  }
  c.theta_tol = j.value("theta_tol", c.theta_tol);
  c.real_theta_tol = j.value("real_theta_tol", c.real_theta_tol);
  const std::string fit = j.value("fit", std::string("dcsbm"));
  if (fit == "dcsbm") {
    c.fit = FitModel::kDCSBM;
  } else if (fit == "sbm") {
    c.fit = FitModel::kSBM;
  } else {
    throw Error("config: fit must be 'dcsbm' or 'sbm'");
  }
  c.epsilon = j.value("epsilon", c.epsilon);
  c.check();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  if (auto* e = std::get_if<EdgeListSource>(&c.source)) {
    const auto base = path.parent_path();
    if (std::filesystem::path(e->edges).is_relative()) e->edges = (base / e->edges).string();
    if (!e->labels.empty() && std::filesystem::path(e->labels).is_relative()) {
      e->labels = (base / e->labels).string();
    }
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  if (const auto* s = std::get_if<SyntheticSource>(&c.source)) {
    json src;
    src["type"] = "synthetic";
    src["n"] = s->n;
    src["pi"] = s->pi;
    src["P"] = matrix_to_json(s->P);
    if (s->theta.kind == ThetaSource::Kind::kExplicit) {
      src["theta"] = s->theta.values;
    } else {
      src["theta"] = s->theta.describe();
    }
    src["labels"] = s->labels == LabelMode::kFixed ? "fixed" : "resample";
    src["observed"] = s->observed;
    src["detect_K"] = s->detect_K;
    j["source"] = src;
  } else {
    const auto& e = std::get<EdgeListSource>(c.source);
    json src;
    src["type"] = "edge_list";
    src["edges"] = e.edges;
    src["labels"] = e.labels;
    src["K"] = e.K;
    src["label_filter_top"] = e.label_filter_top;
    j["source"] = src;
  }
  if (c.transmission.grid) {
    j["transmission"] = {{"within", c.transmission.within}, {"between", c.transmission.between}};
  } else {
    j["transmission"] = {{"beta", c.transmission.scalar}};
  }
  j["t"] = c.t;
  j["lambda"] = c.lambda;
  if (c.budget.floor_sqrt) {
    j["budget"] = "sqrt";
  } else {
    j["budget"] = c.budget.M;
  }
  json strategies = json::array();
  for (Strategy s : c.strategies) strategies.push_back(to_string(s));
  j["strategies"] = strategies;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["solver"] = {{"restarts", c.solver.restarts}, {"gtol", c.solver.gtol}, {"max_iter", c.solver.max_iter}};
  j["theta_tol"] = c.theta_tol;
  j["real_theta_tol"] = c.real_theta_tol;
  j["fit"] = c.fit == FitModel::kSBM ? "sbm" : "dcsbm";
  j["epsilon"] = c.epsilon;
  return j;
}

namespace {

ExperimentConfig sbm_recipe(const std::string& name, const std::vector<double>& diagonal) {
  ExperimentConfig c;
  c.name = name;
  const DCSBMParams preset = sbm_preset(diagonal);
  SyntheticSource s;
  s.n = preset.n;
  s.pi = preset.pi;
  s.P = preset.P;
  c.source = s;
  c.transmission.scalar = {0.2};
  c.t = {1};
  c.lambda = {3.0};
  c.budget.M = 30;
  return c;
}

std::vector<double> beta_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 9; ++i) out.push_back(i / 10.0);
  return out;
}

}  // namespace

std::vector<std::string> builtin_recipe_names() {
  return {"sbm1", "sbm2", "sbm3", "sbm1-lambda", "dcsbm-time", "polblogs", "polblogs-synthetic", "deputies"};
}

ExperimentConfig builtin_recipe(const std::string& name) {
  if (name == "sbm1") return sbm_recipe(name, {10, 5, 2.5});
  if (name == "sbm2") return sbm_recipe(name, {2.5, 5, 10});
  if (name == "sbm3") return sbm_recipe(name, {5, 5, 5});
  if (name == "sbm1-lambda") {
    ExperimentConfig c = sbm_recipe(name, {10, 5, 2.5});
    c.lambda = {0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
    c.strategies = {Strategy::kProposed};
    return c;
  }
  if (name == "dcsbm-time") {
    ExperimentConfig c;
    c.name = name;
    SyntheticSource s;
    s.n = 1000;
    s.pi = {0.5, 0.3, 0.2};
    s.P = dcsbm_time_preset_matrix();
    s.theta = ThetaSource::parse("poisson(5)");
    c.source = s;
    c.transmission.scalar = {0.2};
    c.t = {1, 3, 5};
    c.lambda = {3.0};
    c.budget.M = 30;
    c.strategies = {Strategy::kProposed};
    return c;
  }
  if (name == "polblogs" || name == "deputies") {
    ExperimentConfig c;
    c.name = name;
    EdgeListSource e;
    e.edges = "data/" + name + ".edges";
    e.labels = "data/" + name + ".labels";
    e.K = name == "polblogs" ? 2 : 4;
    e.label_filter_top = name == "polblogs" ? 0 : 4;
    c.source = e;
    c.transmission.grid = true;
    c.transmission.within = beta_grid();
    c.transmission.between = beta_grid();
    c.budget.floor_sqrt = true;
    c.strategies = {Strategy::kProposed};
    return c;
  }
  if (name == "polblogs-synthetic") {
    ExperimentConfig c;
    c.name = name;
    SyntheticSource s;
    s.n = 1222;
    s.pi = {586.0 / 1222.0, 636.0 / 1222.0};
    s.P.resize(2, 2);
    s.P << 0.039, 0.003, 0.003, 0.045;
    s.theta = ThetaSource::parse("pareto(2.5,4)");
    s.labels = LabelMode::kFixed;
    s.observed = true;
    c.source = s;
    c.transmission.grid = true;
    c.transmission.within = beta_grid();
    c.transmission.between = beta_grid();
    c.budget.floor_sqrt = true;
    c.strategies = {Strategy::kProposed};
    return c;
  }
  throw Error("unknown recipe '" + name + "'");
}

}  // namespace fairspread
