#pragma once

// Experiment harness: network ingestion, replicated allocate -> simulate ->
// summarize pipelines and CSV output.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairspread/estimate.hpp"
#include "fairspread/model.hpp"
#include "fairspread/optimizer.hpp"
#include "fairspread/spread.hpp"

namespace fairspread {

/// A network read from disk, with the original node ids (index order) and the
/// optional ground-truth labels and their names.
struct LoadedNetwork {
  Network network;
  std::vector<std::string> node_ids;
  std::optional<CommunityLabels> truth;
  std::vector<std::string> label_names;
};

/// Whitespace- or comma-separated id pairs, '#' comment lines. Direction is
/// ignored, duplicates collapse, self-loops are dropped. Ids are indexed in
/// increasing order (numeric when every id is an integer, else lexicographic).
LoadedNetwork read_edge_list(const std::filesystem::path& edges,
                             const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Induced subgraph on `keep` (sorted, unique). Labels are carried over with
/// empty communities preserved.
LoadedNetwork induced_subgraph(const LoadedNetwork& source, const std::vector<std::size_t>& keep);

/// Largest connected component; ties go to the component with the lowest node.
LoadedNetwork extract_lcc(const LoadedNetwork& source);
Network extract_lcc(const Network& network, std::vector<std::size_t>* kept = nullptr);

/// Keeps nodes whose ground-truth label is among the `groups` most frequent.
LoadedNetwork keep_largest_label_groups(const LoadedNetwork& source, int groups);

struct BudgetRule {
  bool floor_sqrt = false;
  std::size_t M = 30;

  static BudgetRule parse(const std::string& text);
  std::string describe() const;
};

std::size_t seed_budget(std::size_t n, const BudgetRule& rule);

enum class LabelMode { kResample, kFixed };

struct SyntheticSource {
  std::size_t n = 1000;
  std::vector<double> pi;
  Eigen::MatrixXd P;
  ThetaSource theta;
  LabelMode labels = LabelMode::kResample;
  /// Generate one network and analyse it as an observed network (detection,
  /// estimation, fixed graph across replications).
  bool observed = false;
  int detect_K = 0;  // communities to detect when observed (0: K of the model)
};

enum class FitModel { kDCSBM, kSBM };

struct EdgeListSource {
  std::string edges;
  std::string labels;  // optional ground truth
  int K = 2;
  int label_filter_top = 0;  // keep only the largest label groups when > 0
};

struct TransmissionSweep {
  bool grid = false;              // within x between block grid
  std::vector<double> scalar{0.2};
  std::vector<double> within;
  std::vector<double> between;

  /// (beta_within, beta_between) per sweep point; scalar points repeat the value.
  std::vector<std::pair<double, double>> points() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::variant<SyntheticSource, EdgeListSource> source;
  TransmissionSweep transmission;
  std::vector<int> t{1};
  std::vector<double> lambda{3.0};
  BudgetRule budget;
  std::vector<Strategy> strategies{Strategy::kProposed, Strategy::kEqual, Strategy::kProportional,
                                   Strategy::kLargest};
  std::size_t replications = 50;
  std::uint64_t seed = 2023;
  SolverOptions solver;
  double theta_tol = 1e-9;       // synthetic models
  double real_theta_tol = 1e-3;  // estimated per-node theta on observed networks
  FitModel fit = FitModel::kDCSBM;
  double epsilon = 1e-9;

  void check() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Named configurations for the synthetic and real-network experiments:
/// sbm1, sbm2, sbm3, sbm1-lambda, dcsbm-time, polblogs, polblogs-synthetic, deputies.
ExperimentConfig builtin_recipe(const std::string& name);
std::vector<std::string> builtin_recipe_names();

struct ResultRow {
  std::string experiment;
  std::size_t sweep = 0;
  std::size_t replication = 0;
  Strategy strategy = Strategy::kProposed;
  double lambda = 0.0;
  double beta_within = 0.0;
  double beta_between = 0.0;
  int t = 0;
  std::vector<std::size_t> seeds;  // per community
  std::vector<double> q;           // nodes reached by spread, per community
  double H = 0.0;
  double m = 0.0;
  double m_with_seeds = 0.0;
  double H_with_seeds = 0.0;
  double pred_m = 0.0;
  std::vector<double> pred_q;
  double pred_H = 0.0;
};

struct SummaryRow {
  std::string experiment;
  std::size_t sweep = 0;
  Strategy strategy = Strategy::kProposed;
  double lambda = 0.0;
  double beta_within = 0.0;
  double beta_between = 0.0;
  int t = 0;
  std::vector<double> mean_seeds;  // realized seeds per community
  std::size_t replications = 0;
  double mean_H = 0.0, sd_H = 0.0;
  double mean_m = 0.0, sd_m = 0.0;
  double mean_H_with_seeds = 0.0, sd_H_with_seeds = 0.0;
  double mean_m_with_seeds = 0.0, sd_m_with_seeds = 0.0;
  std::vector<double> mean_q;
  double pred_m = 0.0;
  double pred_H = 0.0;
};

/// Allocation computed once per sweep point on the reference model.
struct PlannedAllocation {
  Strategy strategy = Strategy::kProposed;
  std::vector<std::size_t> class_counts;      // proposed: per class
  std::vector<std::size_t> community_counts;  // per community
  Eigen::VectorXd x;                          // relaxed point (integer allocation / w for baselines)
  ObjectiveValue predicted;
  std::optional<RelaxedSolution> relaxed;
};

struct SweepSetting {
  double beta_within = 0.0;
  double beta_between = 0.0;
  double lambda = 0.0;
  int t = 1;
};

struct ExperimentResult {
  int K = 0;
  std::size_t n = 0;
  std::size_t budget = 0;
  std::vector<SweepSetting> sweeps;  // transmission-major, then t, then lambda
  UniqueClasses classes;             // seed classes of the reference model
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<PlannedAllocation> plans;  // sweep-major, strategy-minor
  nlohmann::json echo;                   // resolved configuration and diagnostics
  /// Spread of the first (sweep, replication, strategy) when requested.
  std::optional<ActivationTrace> first_trace;
  CommunityLabels first_trace_labels;
};

struct RunOptions {
  bool simulate = true;  // false: allocations and predictions only
  bool keep_first_trace = false;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int K);

/// results.csv, summary.csv and config.echo under `dir` (created if missing).
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, int K);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows, int K);

}  // namespace fairspread
