#pragma once

// Independent-cascade spread: Monte-Carlo simulation, the exact recursive
// activation probabilities under the DCSBM, and the linearized spread
// operator Psi whose powers approximate coverage.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "fairspread/model.hpp"
#include "fairspread/rng.hpp"

namespace fairspread {

/// Binary seed indicator over nodes.
using SeedMask = std::vector<std::uint8_t>;

Eigen::VectorXd to_vector(const SeedMask& seeds);

/// Transmission probabilities: one scalar beta for every pair, or a symmetric
/// K x K block matrix indexed by the communities of the two endpoints.
class TransmissionSpec {
 public:
  static TransmissionSpec scalar(double beta);
  static TransmissionSpec block(Eigen::MatrixXd betas);
  static TransmissionSpec within_between(int K, double within, double between);

  bool is_scalar() const { return scalar_; }
  double beta(int ci, int cj) const { return scalar_ ? value_ : block_(ci, cj); }
  /// K x K matrix of betas (a constant matrix in scalar mode).
  Eigen::MatrixXd block_matrix(int K) const;

 private:
  bool scalar_ = true;
  double value_ = 0.0;
  Eigen::MatrixXd block_;
};

struct ActivationTrace {
  static constexpr int kNever = -1;
  std::vector<int> activated_at;                  // step of activation, kNever if inactive
  std::vector<std::vector<std::size_t>> frontiers;  // frontiers[r]: nodes first active at step r
  int horizon = 0;
};

/// Runs an independent cascade for t steps on a fixed network. Every directed
/// transmission coin is drawn up front in adjacency order, so two runs from the
/// same generator state are coupled (a superset of seeds activates a superset).
ActivationTrace simulate_ic(const Network& network, const TransmissionSpec& tspec,
                            const SeedMask& seeds, int t, Rng& rng);

/// Whether q_k counts the seeds themselves or only nodes reached by spread.
enum class SeedCounting { kIncludeSeeds, kSpreadOnly };

struct CoverageSummary {
  std::vector<double> q;  // per-community activated proportion
  std::vector<double> p;  // q normalized to sum to one
  double m = 0.0;         // overall activated proportion
  double H = 0.0;         // entropy of p, log base K
};

CoverageSummary coverage(const ActivationTrace& trace, const CommunityLabels& labels, int t,
                         SeedCounting counting = SeedCounting::kIncludeSeeds);

/// Cumulative activation probabilities by step t from the exact product
/// recursion over all potential sources. Per-step probabilities are differences
/// of consecutive cumulative values; seeds are active with probability one.
Eigen::VectorXd exact_activation_probs(const DCSBMParams& params, const CommunityLabels& labels,
                                       const TransmissionSpec& tspec, const SeedMask& seeds, int t);

/// Same recursion, returning the cumulative vectors for every step 0..t.
std::vector<Eigen::VectorXd> exact_activation_history(const DCSBMParams& params,
                                                      const CommunityLabels& labels,
                                                      const TransmissionSpec& tspec,
                                                      const SeedMask& seeds, int t);

/// Per-step view of a cumulative history: step 0 is the seed vector.
std::vector<Eigen::VectorXd> per_step_probabilities(const std::vector<Eigen::VectorXd>& cumulative);

/// Psi applied through matrices over classes of identical nodes. value(x)
/// returns Psi^t V x restricted to one representative per class.
class ClassSpreadMap {
 public:
  ClassSpreadMap(Eigen::MatrixXd map, Eigen::VectorXd multiplicity)
      : map_(std::move(map)), multiplicity_(std::move(multiplicity)) {}

  const Eigen::MatrixXd& matrix() const { return map_; }
  const Eigen::VectorXd& multiplicity() const { return multiplicity_; }
  Eigen::VectorXd apply_power(const Eigen::VectorXd& x, int t) const;

 private:
  Eigen::MatrixXd map_;
  Eigen::VectorXd multiplicity_;
};

/// The linear spread operator Psi_ij = [i != j] beta_ij theta_i theta_j P_{c_i c_j}.
///
/// Psi is stored in factored form (diagonal theta scaling of a community block
/// matrix, minus its diagonal), which applies to any vector in O(nK). A dense
/// copy is kept as well for n <= 5000 unless factored-only is requested; both
/// give the same products.
class SpreadOperator {
 public:
  enum class Storage { kAuto, kDense, kFactored };

  static SpreadOperator build(const DCSBMParams& params, const CommunityLabels& labels,
                              const TransmissionSpec& tspec, Storage storage = Storage::kAuto);

  std::size_t size() const { return theta_.size(); }
  int num_communities() const { return static_cast<int>(block_.rows()); }
  bool has_dense() const { return dense_.size() > 0; }
  const Eigen::MatrixXd& dense() const { return dense_; }
  const CommunityLabels& labels() const { return labels_; }
  const std::vector<double>& theta() const { return theta_; }
  /// beta_kl * P_kl per community pair.
  const Eigen::MatrixXd& block() const { return block_; }

  double entry(std::size_t i, std::size_t j) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& s) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& s) const;
  /// Psi^t s by t successive products.
  Eigen::VectorXd apply_power(const Eigen::VectorXd& s, int t) const;
  Eigen::VectorXd apply_transpose_power(const Eigen::VectorXd& s, int t) const;
  /// Same products without the dense copy.
  Eigen::VectorXd apply_factored(const Eigen::VectorXd& s, bool transpose) const;

  /// Compresses Psi onto classes of nodes sharing community and theta.
  /// class_of[i] is the class of node i; classes must be internally identical.
  ClassSpreadMap compress(const std::vector<std::size_t>& class_of, std::size_t num_classes) const;

 private:
  CommunityLabels labels_;
  std::vector<double> theta_;
  Eigen::MatrixXd block_;
  Eigen::MatrixXd dense_;
};

SpreadOperator build_psi(const DCSBMParams& params, const CommunityLabels& labels,
                         const TransmissionSpec& tspec);

/// (1/n) 1^T Psi^t s.
double approx_total(const SpreadOperator& op, const Eigen::VectorXd& s, int t);

/// q~_k = Z_k^T Psi^t s / (pi_k n). Not clamped to [0, 1].
Eigen::VectorXd approx_by_community(const SpreadOperator& op, const CommunityLabels& labels,
                                    const std::vector<double>& pi, const Eigen::VectorXd& s, int t);

struct MonteCarloEstimate {
  Eigen::VectorXd probability;  // per-node fraction of runs with activation by t
  std::size_t runs = 0;
  Eigen::VectorXd standard_error() const;
};

/// Redraws the network from the model in every run, then spreads.
MonteCarloEstimate monte_carlo_resampled(const DCSBMParams& params, const CommunityLabels& labels,
                                         const TransmissionSpec& tspec, const SeedMask& seeds,
                                         int t, std::size_t runs, std::uint64_t seed);

/// Spreads repeatedly over one fixed network.
MonteCarloEstimate monte_carlo_fixed(const Network& network, const TransmissionSpec& tspec,
                                     const SeedMask& seeds, int t, std::size_t runs,
                                     std::uint64_t seed);

/// CSV with columns node,community,activation_time (1-based community, "never"
/// for inactive nodes).
void write_trace_csv(std::ostream& os, const ActivationTrace& trace, const CommunityLabels& labels);

}  // namespace fairspread
