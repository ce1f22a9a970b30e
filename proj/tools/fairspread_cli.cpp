// fairspread: generate networks, detect communities, allocate seeds, simulate
// spread and run experiment recipes.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fairspread/error.hpp"
#include "fairspread/estimate.hpp"
#include "fairspread/experiment.hpp"

namespace fs = std::filesystem;
using namespace fairspread;

namespace {

struct Overrides {
  std::string config;
  std::string recipe;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> strategies;
  std::vector<double> lambda;
  std::vector<double> beta;
  std::vector<double> beta_within;
  std::vector<double> beta_between;
  std::vector<int> t;
  std::string budget;
  std::optional<std::size_t> replications;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment configuration");
  app->add_option("--recipe", o.recipe, "built-in configuration name");
  app->add_option("--seed", o.seed, "base RNG seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--strategy", o.strategies, "proposed,equal,proportional,largest")->delimiter(',');
  app->add_option("--lambda", o.lambda, "fairness weight(s)")->delimiter(',');
  app->add_option("--beta", o.beta, "scalar transmission probability list")->delimiter(',');
  app->add_option("--beta-within", o.beta_within, "within-community transmission list")->delimiter(',');
  app->add_option("--beta-between", o.beta_between, "between-community transmission list")->delimiter(',');
  app->add_option("--t", o.t, "time horizon(s)")->delimiter(',');
  app->add_option("--budget", o.budget, "seed budget: integer or 'sqrt'");
  app->add_option("--replications", o.replications, "replications per sweep point");
}

ExperimentConfig resolve(const Overrides& o) {
  if (!o.config.empty() && !o.recipe.empty()) throw Error("give either --config or --recipe");
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else if (!o.recipe.empty()) {
    c = builtin_recipe(o.recipe);
  } else {
    throw Error("--config or --recipe is required");
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : o.strategies) c.strategies.push_back(parse_strategy(s));
  }
  if (!o.lambda.empty()) c.lambda = o.lambda;
  if (!o.beta.empty() && (!o.beta_within.empty() || !o.beta_between.empty())) {
    throw Error("give either --beta or --beta-within/--beta-between");
  }
  if (!o.beta.empty()) {
    c.transmission.grid = false;
    c.transmission.scalar = o.beta;
  }
  if (!o.beta_within.empty() || !o.beta_between.empty()) {
    if (o.beta_within.empty() || o.beta_between.empty()) {
      throw Error("--beta-within and --beta-between must be given together");
    }
    c.transmission.grid = true;
    c.transmission.within = o.beta_within;
    c.transmission.between = o.beta_between;
  }
  if (!o.t.empty()) c.t = o.t;
  if (!o.budget.empty()) c.budget = BudgetRule::parse(o.budget);
  if (o.replications) c.replications = *o.replications;
  c.check();
  return c;
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw Error("cannot write " + (dir / name).string());
  return os;
}

void write_labels(const fs::path& dir, const std::vector<std::string>& ids, const CommunityLabels& labels) {
  auto os = open_output(dir, "labels.csv");
  os << "node,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) os << ids[i] << ',' << labels[i] + 1 << '\n';
}

void cmd_generate(const Overrides& o) {
  ExperimentConfig c = resolve(o);
  const auto* s = std::get_if<SyntheticSource>(&c.source);
  if (!s) throw Error("generate needs a synthetic source");
  Rng rng = derive_rng(c.seed, {0});
  CommunityLabels labels =
      s->labels == LabelMode::kFixed ? fixed_labels(s->pi, s->n) : sample_labels(s->pi, s->n, rng);
  DCSBMParams params;
  params.n = s->n;
  params.K = static_cast<int>(s->pi.size());
  params.pi = s->pi;
  params.P = s->P;
  if (s->theta.kind == ThetaSource::Kind::kConstant) {
    params.theta.assign(s->n, 1.0);
  } else {
    params.theta = normalize_theta(s->theta.draw(s->n, rng), labels, s->pi);
  }
  require_valid(params, &labels);
  const Network net = generate_network(params, labels, rng);
  auto os = open_output(o.out, "edges.csv");
  os << "# " << net.num_nodes() << " nodes, " << net.num_edges() << " edges\n";
  for (const auto& [a, b] : net.edges()) os << a << ',' << b << '\n';
  std::vector<std::string> ids(s->n);
  for (std::size_t i = 0; i < s->n; ++i) ids[i] = std::to_string(i);
  write_labels(o.out, ids, labels);
  std::cout << "wrote " << net.num_edges() << " edges on " << net.num_nodes() << " nodes to " << o.out << '\n';
}

void cmd_detect(const std::string& edges, const std::string& truth, int K, bool lcc, std::uint64_t seed,
                const std::string& out) {
  std::optional<fs::path> label_path;
  if (!truth.empty()) label_path = truth;
  LoadedNetwork loaded = read_edge_list(edges, label_path);
  if (lcc) loaded = extract_lcc(loaded);
  Rng rng = derive_rng(seed, {3});
  const SpectralEmbedding emb = score_embed(loaded.network, K);
  const CommunityLabels labels = cluster(emb, K, rng);
  const EstimatedParams est = estimate_params(loaded.network, labels);
  write_labels(out, loaded.node_ids, labels);
  nlohmann::json j;
  j["nodes"] = loaded.network.num_nodes();
  j["edges"] = loaded.network.num_edges();
  j["pi_hat"] = est.params.pi;
  nlohmann::json P = nlohmann::json::array();
  for (Eigen::Index i = 0; i < est.params.P.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index k = 0; k < est.params.P.cols(); ++k) r.push_back(est.params.P(i, k));
    P.push_back(r);
  }
  j["P_hat"] = P;
  j["warnings"] = est.warnings;
  if (loaded.truth && loaded.truth->num_communities() == K) {
    j["label_accuracy"] = best_permutation_accuracy(*loaded.truth, labels);
  }
  auto os = open_output(out, "estimate.json");
  os << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
}

void cmd_allocate(const Overrides& o) {
  ExperimentConfig c = resolve(o);
  RunOptions options;
  options.simulate = false;
  const ExperimentResult r = run_experiment(c, options);
  auto os = open_output(o.out, "allocation.csv");
  os << "sweep,strategy,lambda,beta_within,beta_between,t";
  for (int k = 1; k <= r.K; ++k) os << ",seeds_" << k;
  os << ",pred_m,pred_H\n";
  const std::size_t G = c.strategies.size();
  for (std::size_t i = 0; i < r.plans.size(); ++i) {
    const auto& plan = r.plans[i];
    const auto& sw = r.sweeps[i / G];
    os << i / G << ',' << to_string(plan.strategy) << ',' << sw.lambda << ',' << sw.beta_within << ','
       << sw.beta_between << ',' << sw.t;
    for (auto v : plan.community_counts) os << ',' << v;
    os << ',' << plan.predicted.m << ',' << plan.predicted.H << '\n';
    std::cout << "sweep " << i / G << " " << to_string(plan.strategy) << ":";
    for (auto v : plan.community_counts) std::cout << ' ' << v;
    std::cout << "  (pred m=" << plan.predicted.m << ", H=" << plan.predicted.H << ")\n";
  }
  auto cls = open_output(o.out, "classes.csv");
  cls << "sweep,class,community,theta,weight,x_relaxed,seeds\n";
  for (std::size_t i = 0; i < r.plans.size(); ++i) {
    const auto& plan = r.plans[i];
    if (!plan.relaxed) continue;
    for (std::size_t j = 0; j < r.classes.num_classes(); ++j) {
      cls << i / G << ',' << j << ',' << r.classes.community[j] + 1 << ',' << r.classes.theta[j] << ','
          << r.classes.weight[j] << ',' << plan.relaxed->x[static_cast<Eigen::Index>(j)] << ','
          << plan.class_counts[j] << '\n';
    }
  }
  auto echo = open_output(o.out, "config.echo");
  echo << r.echo.dump(2) << '\n';
}

void cmd_simulate(Overrides o) {
  if (!o.replications) o.replications = 1;
  ExperimentConfig c = resolve(o);
  RunOptions options;
  options.keep_first_trace = true;
  const ExperimentResult r = run_experiment(c, options);
  write_results(r, o.out);
  if (r.first_trace) {
    auto os = open_output(o.out, "trace.csv");
    write_trace_csv(os, *r.first_trace, r.first_trace_labels);
  }
  for (const auto& s : r.summary) {
    std::cout << "sweep " << s.sweep << " " << to_string(s.strategy) << ": mean H=" << s.mean_H
              << " mean m=" << s.mean_m << " over " << s.replications << " replication(s)\n";
  }
}

void cmd_experiment(const Overrides& o, bool print_config) {
  ExperimentConfig c = resolve(o);
  if (print_config) {
    std::cout << to_json(c).dump(2) << '\n';
    return;
  }
  const ExperimentResult r = run_experiment(c);
  write_results(r, o.out);
  std::cout << "wrote " << r.rows.size() << " rows to " << (fs::path(o.out) / "results.csv").string() << '\n';
  for (const auto& s : r.summary) {
    std::cout << "sweep " << s.sweep << " " << to_string(s.strategy) << ": mean H=" << s.mean_H << " (sd "
              << s.sd_H << "), mean m=" << s.mean_m << " (sd " << s.sd_m << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair seed allocation for information spread on block-model networks"};
  app.require_subcommand(1);

  Overrides gen, alloc, sim, exp;
  auto* generate = app.add_subcommand("generate", "sample a network from a synthetic configuration");
  add_common(generate, gen);

  std::string det_edges, det_truth, det_out = ".";
  int det_K = 2;
  bool det_lcc = false;
  std::uint64_t det_seed = 2023;
  auto* detect = app.add_subcommand("detect", "SCORE community detection and parameter estimates");
  detect->add_option("--edges", det_edges, "edge list")->required();
  detect->add_option("--labels", det_truth, "ground-truth labels for scoring");
  detect->add_option("--K", det_K, "number of communities")->required();
  detect->add_flag("--lcc", det_lcc, "restrict to the largest connected component");
  detect->add_option("--seed", det_seed, "k-means RNG seed");
  detect->add_option("--out", det_out, "output directory");

  auto* allocate = app.add_subcommand("allocate", "seed allocation per strategy and sweep point");
  add_common(allocate, alloc);
  auto* simulate = app.add_subcommand("simulate", "allocate, spread and summarize (default one replication)");
  add_common(simulate, sim);
  bool print_config = false;
  auto* experiment = app.add_subcommand("experiment", "run a full replicated experiment");
  add_common(experiment, exp);
  experiment->add_flag("--print-config", print_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) cmd_generate(gen);
    if (*detect) cmd_detect(det_edges, det_truth, det_K, det_lcc, det_seed, det_out);
    if (*allocate) cmd_allocate(alloc);
    if (*simulate) cmd_simulate(sim);
    if (*experiment) cmd_experiment(exp, print_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
