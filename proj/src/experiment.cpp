#include "fairspread/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fairspread/error.hpp"
#include "fairspread/parallel.hpp"

namespace fairspread {

namespace {

constexpr std::uint64_t kThetaStream = 1;
constexpr std::uint64_t kObservedStream = 2;
constexpr std::uint64_t kDetectStream = 3;
constexpr std::uint64_t kSolverStream = 4;
constexpr std::uint64_t kReplicateStream = 5;
constexpr std::uint64_t kSpreadStream = 6;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!field.empty()) out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (!field.empty()) out.push_back(std::move(field));
  return out;
}

bool is_comment_or_blank(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

bool parse_integer(const std::string& s, long long& value) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end;
}

/// Sorts ids numerically when all are integers, lexicographically otherwise.
std::vector<std::string> sort_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<long long> numeric(ids.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < ids.size() && all_numeric; ++i) {
    all_numeric = parse_integer(ids[i], numeric[i]);
  }
  if (all_numeric) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return numeric[a] < numeric[b]; });
    std::vector<std::string> sorted;
    sorted.reserve(ids.size());
    for (std::size_t i : order) sorted.push_back(ids[i]);
    return sorted;
  }
  return ids;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string fmt(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

LoadedNetwork read_edge_list(const std::filesystem::path& edges_path,
                             const std::optional<std::filesystem::path>& labels_path) {
  std::ifstream in = open_input(edges_path);
  std::vector<std::pair<std::string, std::string>> raw;
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw Error(edges_path.string() + ":" + std::to_string(line_no) +
                  ": expected two node ids, got " + std::to_string(fields.size()) + " fields");
    }
    ids.push_back(fields[0]);
    ids.push_back(fields[1]);
    raw.emplace_back(std::move(fields[0]), std::move(fields[1]));
  }

  LoadedNetwork out;
  out.node_ids = sort_ids(std::move(ids));
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < out.node_ids.size(); ++i) index.emplace(out.node_ids[i], i);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) {
    if (a == b) continue;
    edges.emplace_back(index.at(a), index.at(b));
  }
  out.network = Network(out.node_ids.size(), std::move(edges));

  if (labels_path) {
    std::ifstream lin = open_input(*labels_path);
    std::vector<std::string> node_label(out.node_ids.size());
    std::vector<std::string> names;
    line_no = 0;
    bool first = true;
    while (std::getline(lin, line)) {
      ++line_no;
      if (is_comment_or_blank(line)) continue;
      auto fields = split_fields(line);
      if (first && fields.size() == 2 && fields[0] == "node") {
        first = false;
        continue;
      }
      first = false;
      if (fields.size() != 2) {
        throw Error(labels_path->string() + ":" + std::to_string(line_no) +
                    ": expected node id and label");
      }
      auto it = index.find(fields[0]);
      if (it == index.end()) {
        throw Error(labels_path->string() + ":" + std::to_string(line_no) + ": label for unknown node " +
                    fields[0]);
      }
      node_label[it->second] = fields[1];
      names.push_back(fields[1]);
    }
    for (std::size_t i = 0; i < node_label.size(); ++i) {
      if (node_label[i].empty()) throw Error("node " + out.node_ids[i] + " has no label");
    }
    out.label_names = sort_ids(std::move(names));
    std::map<std::string, int> label_index;
    for (std::size_t k = 0; k < out.label_names.size(); ++k) {
      label_index.emplace(out.label_names[k], static_cast<int>(k));
    }
    std::vector<int> values(node_label.size());
    for (std::size_t i = 0; i < node_label.size(); ++i) values[i] = label_index.at(node_label[i]);
    out.truth = CommunityLabels(std::move(values), static_cast<int>(out.label_names.size()));
  }
  return out;
}

LoadedNetwork induced_subgraph(const LoadedNetwork& source, const std::vector<std::size_t>& keep) {
  const std::size_t n = source.network.num_nodes();
  std::vector<std::size_t> new_index(n, n);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= n) throw Error("induced_subgraph: node index out of range");
    new_index[keep[i]] = i;
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [a, b] : source.network.edges()) {
    if (new_index[a] < n && new_index[b] < n) edges.emplace_back(new_index[a], new_index[b]);
  }
  LoadedNetwork out;
  out.network = Network(keep.size(), std::move(edges));
  out.node_ids.reserve(keep.size());
  for (std::size_t i : keep) {
    out.node_ids.push_back(i < source.node_ids.size() ? source.node_ids[i] : std::to_string(i));
  }
  out.label_names = source.label_names;
  if (source.truth) {
    std::vector<int> values;
    values.reserve(keep.size());
    for (std::size_t i : keep) values.push_back((*source.truth)[i]);
    out.truth = CommunityLabels(std::move(values), source.truth->num_communities());
  }
  return out;
}

Network extract_lcc(const Network& network, std::vector<std::size_t>* kept) {
  const std::size_t n = network.num_nodes();
  if (n == 0) throw Error("extract_lcc: empty network");
  std::vector<std::size_t> component(n, n);
  std::size_t best = 0, best_size = 0, count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] != n) continue;
    std::size_t size = 0;
    stack.push_back(start);
    component[start] = count;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      ++size;
      for (std::size_t v : network.neighbors(u)) {
        if (component[v] == n) {
          component[v] = count;
          stack.push_back(v);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = count;
    }
    ++count;
  }
  std::vector<std::size_t> keep;
  keep.reserve(best_size);
  for (std::size_t i = 0; i < n; ++i) {
    if (component[i] == best) keep.push_back(i);
  }
  LoadedNetwork wrapped{network, {}, network.labels(), {}};
  LoadedNetwork sub = induced_subgraph(wrapped, keep);
  if (sub.truth) sub.network.set_labels(*sub.truth);
  if (kept) *kept = keep;
  return sub.network;
}

LoadedNetwork extract_lcc(const LoadedNetwork& source) {
  std::vector<std::size_t> keep;
  extract_lcc(source.network, &keep);
  return induced_subgraph(source, keep);
}

LoadedNetwork keep_largest_label_groups(const LoadedNetwork& source, int groups) {
  if (!source.truth) throw Error("label filtering needs a label file");
  const auto& sizes = source.truth->community_sizes();
  const int K = source.truth->num_communities();
  if (groups < 1) throw Error("label filter must keep at least one group");
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
  });
  const int kept_groups = std::min(groups, K);
  std::vector<int> remap(static_cast<std::size_t>(K), -1);
  std::vector<int> chosen(order.begin(), order.begin() + kept_groups);
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> names;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    remap[static_cast<std::size_t>(chosen[k])] = static_cast<int>(k);
    names.push_back(source.label_names[static_cast<std::size_t>(chosen[k])]);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < source.truth->size(); ++i) {
    if (remap[static_cast<std::size_t>((*source.truth)[i])] >= 0) keep.push_back(i);
  }
  LoadedNetwork out = induced_subgraph(source, keep);
  std::vector<int> values;
  values.reserve(keep.size());
  for (std::size_t i : keep) values.push_back(remap[static_cast<std::size_t>((*source.truth)[i])]);
  out.truth = CommunityLabels(std::move(values), kept_groups);
  out.label_names = std::move(names);
  return out;
}

BudgetRule BudgetRule::parse(const std::string& text) {
  BudgetRule rule;
  if (text == "sqrt" || text == "floor-sqrt-n") {
    rule.floor_sqrt = true;
    return rule;
  }
  long long value = 0;
  if (!parse_integer(text, value) || value < 1) {
    throw Error("budget must be a positive integer or 'sqrt', got '" + text + "'");
  }
  rule.M = static_cast<std::size_t>(value);
  return rule;
}

std::string BudgetRule::describe() const { return floor_sqrt ? "floor-sqrt-n" : std::to_string(M); }

std::size_t seed_budget(std::size_t n, const BudgetRule& rule) {
  if (rule.floor_sqrt) {
    std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    if (r == 0) throw Error("seed budget: network has no nodes");
    return r;
  }
  if (rule.M > n) {
    throw Error("seed budget " + std::to_string(rule.M) + " exceeds network size " + std::to_string(n));
  }
  return rule.M;
}

std::vector<std::pair<double, double>> TransmissionSweep::points() const {
  std::vector<std::pair<double, double>> out;
  if (grid) {
    for (double w : within) {
      for (double b : between) out.emplace_back(w, b);
    }
  } else {
    for (double b : scalar) out.emplace_back(b, b);
  }
  return out;
}

namespace {

struct ReferenceModel {
  DCSBMParams params;
  CommunityLabels labels;
  UniqueClasses classes;
  std::size_t M = 0;

  // Synthetic regeneration.
  bool regenerate = false;
  SyntheticSource synth;
  std::vector<double> theta_raw;
  std::map<std::pair<int, double>, std::size_t> class_key;  // (community, raw theta) -> class

  // Observed network, fixed across replications.
  Network observed;
};

bool is_constant_theta(const SyntheticSource& s) { return s.theta.kind == ThetaSource::Kind::kConstant; }

std::vector<double> instance_theta(const SyntheticSource& s, const std::vector<double>& raw,
                                   const CommunityLabels& labels) {
  if (is_constant_theta(s)) return std::vector<double>(s.n, 1.0);
  return normalize_theta(raw, labels, s.pi);
}

DCSBMParams synthetic_params(const SyntheticSource& s, std::vector<double> theta) {
  DCSBMParams p;
  p.n = s.n;
  p.K = static_cast<int>(s.pi.size());
  p.pi = s.pi;
  p.P = s.P;
  p.theta = std::move(theta);
  return p;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

/// Detection and estimation on an observed network; fills the reference model.
void fit_observed(const ExperimentConfig& config, LoadedNetwork loaded, int K, ReferenceModel& ref,
                  nlohmann::json& diag) {
  diag["observed_nodes"] = loaded.network.num_nodes();
  diag["observed_edges"] = loaded.network.num_edges();
  Rng detect_rng = derive_rng(config.seed, {kDetectStream});
  const SpectralEmbedding emb = score_embed(loaded.network, K);
  CommunityLabels labels = cluster(emb, K, detect_rng);
  EstimatedParams est = estimate_params(loaded.network, labels);
  if (loaded.truth && loaded.truth->num_communities() == K) {
    diag["label_accuracy"] = best_permutation_accuracy(*loaded.truth, labels);
    // Ground-truth community (0-based) matched to each detected community.
    diag["label_matching"] = best_permutation(*loaded.truth, labels);
  }
  diag["pi_hat"] = est.params.pi;
  diag["P_hat"] = matrix_json(est.params.P);
  diag["estimation_warnings"] = est.warnings;
  if (config.fit == FitModel::kSBM) {
    est.params.theta.assign(est.params.n, 1.0);
  }
  ref.params = std::move(est.params);
  ref.labels = labels;
  ref.classes = collapse_classes(ref.params, ref.labels,
                                 config.fit == FitModel::kSBM ? 0.0 : config.real_theta_tol);
  ref.observed = std::move(loaded.network);
  ref.observed.set_labels(labels);
  ref.regenerate = false;
}

ReferenceModel build_reference(const ExperimentConfig& config, nlohmann::json& diag) {
  ReferenceModel ref;
  if (const auto* synth = std::get_if<SyntheticSource>(&config.source)) {
    Rng theta_rng = derive_rng(config.seed, {kThetaStream});
    ref.theta_raw = is_constant_theta(*synth) ? std::vector<double>(synth->n, 1.0)
                                              : synth->theta.draw(synth->n, theta_rng);
    ref.synth = *synth;
    if (synth->observed) {
      Rng rng = derive_rng(config.seed, {kObservedStream});
      CommunityLabels labels = synth->labels == LabelMode::kFixed ? fixed_labels(synth->pi, synth->n)
                                                                  : sample_labels(synth->pi, synth->n, rng);
      DCSBMParams params = synthetic_params(*synth, instance_theta(*synth, ref.theta_raw, labels));
      require_valid(params, &labels);
      LoadedNetwork loaded;
      loaded.network = generate_network(params, labels, rng);
      loaded.node_ids.resize(synth->n);
      for (std::size_t i = 0; i < synth->n; ++i) loaded.node_ids[i] = std::to_string(i);
      loaded.truth = labels;
      diag["generated_nodes"] = loaded.network.num_nodes();
      diag["generated_edges"] = loaded.network.num_edges();
      loaded = extract_lcc(loaded);
      const int K = synth->detect_K > 0 ? synth->detect_K : static_cast<int>(synth->pi.size());
      fit_observed(config, std::move(loaded), K, ref, diag);
    } else {
      ref.labels = fixed_labels(synth->pi, synth->n);
      ref.params = synthetic_params(*synth, instance_theta(*synth, ref.theta_raw, ref.labels));
      require_valid(ref.params, &ref.labels);
      ref.classes = collapse_classes(ref.params, ref.labels, config.theta_tol);
      ref.regenerate = true;
      for (std::size_t i = 0; i < synth->n; ++i) {
        ref.class_key.emplace(std::make_pair(ref.labels[i], ref.theta_raw[i]), ref.classes.class_of[i]);
      }
    }
  } else {
    const auto& src = std::get<EdgeListSource>(config.source);
    std::optional<std::filesystem::path> label_path;
    if (!src.labels.empty()) label_path = src.labels;
    LoadedNetwork loaded = read_edge_list(src.edges, label_path);
    diag["file_nodes"] = loaded.network.num_nodes();
    diag["file_edges"] = loaded.network.num_edges();
    if (src.label_filter_top > 0) loaded = keep_largest_label_groups(loaded, src.label_filter_top);
    loaded = extract_lcc(loaded);
    fit_observed(config, std::move(loaded), src.K, ref, diag);
  }
  ref.M = seed_budget(ref.params.n, config.budget);
  diag["n"] = ref.params.n;
  diag["K"] = ref.params.K;
  diag["M"] = ref.M;
  diag["classes"] = ref.classes.num_classes();
  return ref;
}

/// Draws `count` nodes uniformly from `pool` that are not yet seeded.
std::size_t seed_from_pool(const std::vector<std::size_t>& pool, std::size_t count, SeedMask& seeds,
                           Rng& rng) {
  std::vector<std::size_t> free;
  for (std::size_t i : pool) {
    if (!seeds[i]) free.push_back(i);
  }
  std::vector<std::size_t> chosen;
  std::sample(free.begin(), free.end(), std::back_inserter(chosen), std::min(count, free.size()), rng);
  for (std::size_t i : chosen) seeds[i] = 1;
  return chosen.size();
}

/// Places the planned allocation on a replication's node set. Class requests
/// are served from matching nodes (same community and raw theta); shortfalls
/// fall back to the community, then to any node.
SeedMask place_seeds(const PlannedAllocation& plan, const ReferenceModel& ref,
                     const CommunityLabels& labels, bool same_nodes, Rng& rng) {
  const std::size_t n = labels.size();
  const int K = labels.num_communities();
  SeedMask seeds(n, 0);
  std::vector<std::size_t> community_need(static_cast<std::size_t>(K), 0);
  if (plan.strategy == Strategy::kProposed && same_nodes) {
    return expand_seeds(plan.class_counts, ref.classes, rng);
  }
  if (plan.strategy == Strategy::kProposed) {
    std::vector<std::vector<std::size_t>> pools(ref.classes.num_classes());
    for (std::size_t i = 0; i < n; ++i) {
      auto it = ref.class_key.find({labels[i], ref.theta_raw[i]});
      if (it != ref.class_key.end()) pools[it->second].push_back(i);
    }
    for (std::size_t j = 0; j < pools.size(); ++j) {
      const std::size_t want = plan.class_counts[j];
      const std::size_t got = seed_from_pool(pools[j], want, seeds, rng);
      community_need[static_cast<std::size_t>(ref.classes.community[j])] += want - got;
    }
  } else {
    community_need = plan.community_counts;
  }
  std::size_t leftover = 0;
  for (int k = 0; k < K; ++k) {
    const std::size_t want = community_need[static_cast<std::size_t>(k)];
    if (want == 0) continue;
    leftover += want - seed_from_pool(labels.members(k), want, seeds, rng);
  }
  if (leftover > 0) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    seed_from_pool(all, leftover, seeds, rng);
  }
  return seeds;
}

PlannedAllocation plan_allocation(Strategy strategy, const LinearizedObjective& objective,
                                  const ReferenceModel& ref, const ExperimentConfig& config,
                                  std::size_t sweep) {
  PlannedAllocation plan;
  plan.strategy = strategy;
  const auto& classes = ref.classes;
  const int K = ref.params.K;
  if (strategy == Strategy::kProposed) {
    SolverOptions options = config.solver;
    options.seed = derive_rng(config.seed, {kSolverStream, sweep})();
    RelaxedSolution sol = solve_relaxed(objective, classes, Eigen::VectorXd(), options);
    plan.class_counts = round_allocation(sol.x, classes.weight, ref.M);
    plan.community_counts = class_counts_by_community(plan.class_counts, classes, K);
    plan.x.resize(static_cast<Eigen::Index>(classes.num_classes()));
    for (std::size_t j = 0; j < classes.num_classes(); ++j) {
      plan.x[static_cast<Eigen::Index>(j)] =
          static_cast<double>(plan.class_counts[j]) / static_cast<double>(classes.weight[j]);
    }
    plan.relaxed = std::move(sol);
  } else {
    plan.community_counts = baseline_allocation(strategy, ref.labels.community_sizes(), ref.M);
    plan.x = community_allocation_to_relaxed(plan.community_counts, classes);
  }
  plan.predicted = objective.value(plan.x);
  return plan;
}

}  // namespace

void ExperimentConfig::check() const {
  if (replications < 1) throw Error("config: replications must be at least 1");
  if (t.empty() || lambda.empty()) throw Error("config: sweep lists must be nonempty");
  for (int v : t) {
    if (v < 1) throw Error("config: t must be at least 1");
  }
  for (double v : lambda) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("config: lambda must be finite and nonnegative");
  }
  const auto points = transmission.points();
  if (points.empty()) throw Error("config: transmission sweep must be nonempty");
  for (const auto& [w, b] : points) {
    if (!(w >= 0.0 && w <= 1.0 && b >= 0.0 && b <= 1.0)) {
      throw Error("config: transmission probabilities must lie in [0, 1]");
    }
  }
  if (strategies.empty()) throw Error("config: no strategies selected");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    for (std::size_t j = i + 1; j < strategies.size(); ++j) {
      if (strategies[i] == strategies[j]) throw Error("config: strategy listed twice");
    }
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw Error("config: epsilon must lie in (0, 1e-6]");
  if (const auto* s = std::get_if<SyntheticSource>(&source)) {
    if (s->n == 0) throw Error("config: n must be positive");
    const auto K = static_cast<Eigen::Index>(s->pi.size());
    if (K == 0 || s->P.rows() != K || s->P.cols() != K) {
      throw Error("config: P must be K x K with K = length of pi");
    }
    DCSBMParams p;
    p.n = s->n;
    p.K = static_cast<int>(K);
    p.pi = s->pi;
    p.P = s->P;
    p.theta.assign(s->n, 1.0);
    require_valid(p);
  } else {
    const auto& e = std::get<EdgeListSource>(source);
    if (e.edges.empty()) throw Error("config: edge list path is empty");
    if (e.K < 1) throw Error("config: K must be at least 1");
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.check();
  ExperimentResult result;
  nlohmann::json diag;
  ReferenceModel ref;
  try {
    ref = build_reference(config, diag);
  } catch (const Error& e) {
    throw Error("experiment '" + config.name + "': " + e.what());
  }
  const int K = ref.params.K;
  const std::size_t R = config.replications;
  const std::size_t G = config.strategies.size();
  result.K = K;
  result.n = ref.params.n;
  result.budget = ref.M;

  result.classes = ref.classes;
  std::vector<SweepSetting>& sweep = result.sweeps;
  for (const auto& [w, b] : config.transmission.points()) {
    for (int t : config.t) {
      for (double lambda : config.lambda) sweep.push_back({w, b, lambda, t});
    }
  }

  if (options.simulate) result.rows.resize(sweep.size() * R * G);
  result.plans.reserve(sweep.size() * G);
  nlohmann::json plans_json = nlohmann::json::array();
  for (std::size_t s = 0; s < sweep.size(); ++s) {
    const SweepSetting pt = sweep[s];
    const TransmissionSpec tspec = config.transmission.grid
                                       ? TransmissionSpec::within_between(K, pt.beta_within, pt.beta_between)
                                       : TransmissionSpec::scalar(pt.beta_within);
    std::vector<PlannedAllocation> plans;
    try {
      const SpreadOperator op = SpreadOperator::build(ref.params, ref.labels, tspec);
      ObjectiveConfig oc;
      oc.lambda = pt.lambda;
      oc.t = pt.t;
      oc.M = ref.M;
      oc.epsilon = config.epsilon;
      oc.check(ref.params.n);
      const LinearizedObjective objective(op, ref.params.pi, ref.classes, oc);
      for (Strategy g : config.strategies) plans.push_back(plan_allocation(g, objective, ref, config, s));
    } catch (const Error& e) {
      throw Error("experiment '" + config.name + "', sweep " + std::to_string(s) + ": " + e.what());
    }
    for (const auto& plan : plans) {
      nlohmann::json pj;
      pj["sweep"] = s;
      pj["strategy"] = to_string(plan.strategy);
      pj["seeds"] = plan.community_counts;
      pj["pred_m"] = plan.predicted.m;
      pj["pred_H"] = plan.predicted.H;
      if (plan.relaxed) {
        pj["relaxed_f"] = plan.relaxed->value.f;
        pj["relaxed_converged"] = plan.relaxed->converged;
        pj["relaxed_iterations"] = plan.relaxed->iterations;
      }
      if ((plan.predicted.q.array() > 1.0).any()) pj["pred_q_exceeds_one"] = true;
      plans_json.push_back(pj);
    }

    if (!options.simulate) {
      for (auto& plan : plans) result.plans.push_back(std::move(plan));
      continue;
    }
    parallel_for(R, [&](std::size_t r) {
      Network instance_network;
      CommunityLabels labels;
      const Network* network = &ref.observed;
      if (ref.regenerate) {
        Rng rng = derive_rng(config.seed, {kReplicateStream, s, r});
        labels = ref.synth.labels == LabelMode::kFixed ? ref.labels
                                                       : sample_labels(ref.synth.pi, ref.synth.n, rng);
        const DCSBMParams params = synthetic_params(ref.synth, instance_theta(ref.synth, ref.theta_raw, labels));
        instance_network = generate_network(params, labels, rng);
        instance_network.set_labels(labels);
        network = &instance_network;
      } else {
        labels = ref.labels;
      }
      for (std::size_t g = 0; g < G; ++g) {
        const PlannedAllocation& plan = plans[g];
        Rng rng = derive_rng(config.seed, {kSpreadStream, s, r, g});
        const bool same_nodes = !ref.regenerate || ref.synth.labels == LabelMode::kFixed;
        const SeedMask seeds = place_seeds(plan, ref, labels, same_nodes, rng);
        const ActivationTrace trace = simulate_ic(*network, tspec, seeds, pt.t, rng);
        if (options.keep_first_trace && s == 0 && r == 0 && g == 0) {
          result.first_trace = trace;
          result.first_trace_labels = labels;
        }
        const CoverageSummary spread = coverage(trace, labels, pt.t, SeedCounting::kSpreadOnly);
        const CoverageSummary with_seeds = coverage(trace, labels, pt.t, SeedCounting::kIncludeSeeds);

        ResultRow& row = result.rows[(s * R + r) * G + g];
        row.experiment = config.name;
        row.sweep = s;
        row.replication = r;
        row.strategy = plan.strategy;
        row.lambda = pt.lambda;
        row.beta_within = pt.beta_within;
        row.beta_between = pt.beta_between;
        row.t = pt.t;
        row.seeds.assign(static_cast<std::size_t>(K), 0);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
          if (seeds[i]) ++row.seeds[static_cast<std::size_t>(labels[i])];
        }
        row.q = spread.q;
        row.H = spread.H;
        row.m = spread.m;
        row.H_with_seeds = with_seeds.H;
        row.m_with_seeds = with_seeds.m;
        row.pred_m = plan.predicted.m;
        row.pred_q.assign(plan.predicted.q.data(), plan.predicted.q.data() + plan.predicted.q.size());
        row.pred_H = plan.predicted.H;
      }
    });
    for (auto& plan : plans) result.plans.push_back(std::move(plan));
  }

  result.summary = summarize(result.rows, K);
  result.echo["config"] = to_json(config);
  diag["coverage_counting"] =
      "q, H and m count nodes reached by spread (seeds excluded); *_with_seeds columns include seeds";
  diag["label_mode"] = ref.regenerate ? (ref.synth.labels == LabelMode::kFixed ? "fixed" : "resample")
                                      : "observed network";
  diag["seed_class_theta_tol"] =
      ref.regenerate ? config.theta_tol : (config.fit == FitModel::kSBM ? 0.0 : config.real_theta_tol);
  result.echo["resolved"] = diag;
  result.echo["allocations"] = plans_json;
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int K) {
  std::vector<SummaryRow> out;
  std::map<std::pair<std::size_t, int>, std::size_t> slot;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const auto& row : rows) {
    const auto key = std::make_pair(row.sweep, static_cast<int>(row.strategy));
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, groups.size()).first;
      groups.emplace_back();
    }
    groups[it->second].push_back(&row);
  }
  const auto k_count = static_cast<std::size_t>(K);
  for (const auto& group : groups) {
    const ResultRow& first = *group.front();
    SummaryRow s;
    s.experiment = first.experiment;
    s.sweep = first.sweep;
    s.strategy = first.strategy;
    s.lambda = first.lambda;
    s.beta_within = first.beta_within;
    s.beta_between = first.beta_between;
    s.t = first.t;
    s.replications = group.size();
    std::vector<double> H, m, Hs, ms;
    s.mean_seeds.assign(k_count, 0.0);
    s.mean_q.assign(k_count, 0.0);
    for (const ResultRow* row : group) {
      H.push_back(row->H);
      m.push_back(row->m);
      Hs.push_back(row->H_with_seeds);
      ms.push_back(row->m_with_seeds);
      for (std::size_t k = 0; k < k_count && k < row->q.size(); ++k) {
        s.mean_q[k] += row->q[k] / static_cast<double>(group.size());
        s.mean_seeds[k] += static_cast<double>(row->seeds[k]) / static_cast<double>(group.size());
      }
    }
    s.mean_H = mean_of(H);
    s.sd_H = sd_of(H);
    s.mean_m = mean_of(m);
    s.sd_m = sd_of(m);
    s.mean_H_with_seeds = mean_of(Hs);
    s.sd_H_with_seeds = sd_of(Hs);
    s.mean_m_with_seeds = mean_of(ms);
    s.sd_m_with_seeds = sd_of(ms);
    s.pred_m = first.pred_m;
    s.pred_H = first.pred_H;
    out.push_back(std::move(s));
  }
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, int K) {
  os << "experiment,sweep,replication,strategy,lambda,beta_within,beta_between,t";
  for (int k = 1; k <= K; ++k) os << ",seeds_" << k;
  for (int k = 1; k <= K; ++k) os << ",q_" << k;
  os << ",H,m,H_with_seeds,m_with_seeds,pred_m";
  for (int k = 1; k <= K; ++k) os << ",pred_q_" << k;
  os << ",pred_H\n";
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.sweep << ',' << r.replication << ',' << to_string(r.strategy) << ','
       << fmt(r.lambda) << ',' << fmt(r.beta_within) << ',' << fmt(r.beta_between) << ',' << r.t;
    for (auto v : r.seeds) os << ',' << v;
    for (double v : r.q) os << ',' << fmt(v);
    os << ',' << fmt(r.H) << ',' << fmt(r.m) << ',' << fmt(r.H_with_seeds) << ',' << fmt(r.m_with_seeds)
       << ',' << fmt(r.pred_m);
    for (double v : r.pred_q) os << ',' << fmt(v);
    os << ',' << fmt(r.pred_H) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows, int K) {
  os << "experiment,sweep,strategy,lambda,beta_within,beta_between,t,replications";
  for (int k = 1; k <= K; ++k) os << ",mean_seeds_" << k;
  for (int k = 1; k <= K; ++k) os << ",mean_q_" << k;
  os << ",mean_H,sd_H,mean_m,sd_m,mean_H_with_seeds,sd_H_with_seeds,mean_m_with_seeds,sd_m_with_seeds,"
        "pred_m,pred_H\n";
  for (const auto& s : rows) {
    os << s.experiment << ',' << s.sweep << ',' << to_string(s.strategy) << ',' << fmt(s.lambda) << ','
       << fmt(s.beta_within) << ',' << fmt(s.beta_between) << ',' << s.t << ',' << s.replications;
    for (double v : s.mean_seeds) os << ',' << fmt(v);
    for (double v : s.mean_q) os << ',' << fmt(v);
    os << ',' << fmt(s.mean_H) << ',' << fmt(s.sd_H) << ',' << fmt(s.mean_m) << ',' << fmt(s.sd_m) << ','
       << fmt(s.mean_H_with_seeds) << ',' << fmt(s.sd_H_with_seeds) << ',' << fmt(s.mean_m_with_seeds)
       << ',' << fmt(s.sd_m_with_seeds) << ',' << fmt(s.pred_m) << ',' << fmt(s.pred_H) << '\n';
  }
}

void write_results(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("results.csv");
    write_results_csv(os, result.rows, result.K);
    if (!os) throw Error("write failed: results.csv");
  }
  {
    auto os = open("summary.csv");
    write_summary_csv(os, result.summary, result.K);
    if (!os) throw Error("write failed: summary.csv");
  }
  {
    auto os = open("config.echo");
    os << result.echo.dump(2) << '\n';
    if (!os) throw Error("write failed: config.echo");
  }
}

}  // namespace fairspread
