#pragma once

// Degree-corrected stochastic block model: parameter types, validation,
// identifiability normalization and sampling of labels and networks.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fairspread/rng.hpp"

namespace fairspread {

/// Community assignment of every node. Communities are 0-based internally;
/// file formats and reports use 1-based labels.
class CommunityLabels {
 public:
  CommunityLabels() = default;
  CommunityLabels(std::vector<int> labels, int num_communities);

  std::size_t size() const { return labels_.size(); }
  int num_communities() const { return num_communities_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& values() const { return labels_; }

  /// Node counts n_k per community.
  const std::vector<std::size_t>& community_sizes() const { return sizes_; }
  /// Nodes of community k in increasing index order.
  std::vector<std::size_t> members(int k) const;
  /// Dense n x K indicator matrix Z.
  Eigen::MatrixXd membership_matrix() const;

 private:
  std::vector<int> labels_;
  int num_communities_ = 0;
  std::vector<std::size_t> sizes_;
};

struct DCSBMParams {
  std::size_t n = 0;
  int K = 0;
  std::vector<double> pi;
  Eigen::MatrixXd P;
  std::vector<double> theta;  // all ones for a plain SBM

  bool is_sbm() const;
};

struct Violation {
  std::string field;
  std::string message;
};

/// Reports every broken parameter invariant. Checks that need community
/// membership (identifiability, edge-probability validity) run only when
/// labels are supplied.
std::vector<Violation> validate(const DCSBMParams& params,
                                const CommunityLabels* labels = nullptr);

/// Throws Error listing the violations, if any.
void require_valid(const DCSBMParams& params, const CommunityLabels* labels = nullptr);

/// Rescales theta within each community so that sum_{i in C_k} theta_i = pi_k * n.
std::vector<double> normalize_theta(const std::vector<double>& theta_raw,
                                    const CommunityLabels& labels,
                                    const std::vector<double>& pi);

CommunityLabels sample_labels(const std::vector<double>& pi, std::size_t n, Rng& rng);

/// Deterministic labels with sizes from largest-remainder apportionment of
/// n by pi; nodes are assigned to communities in contiguous index blocks.
CommunityLabels fixed_labels(const std::vector<double>& pi, std::size_t n);

/// Largest-remainder apportionment of `total` proportionally to `weights`
/// (ties go to the lowest index).
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total);

/// Undirected simple graph. Edges are stored once with first < second and kept
/// sorted; adjacency lists are sorted.
class Network {
 public:
  Network() = default;
  Network(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }
  bool has_edge(std::size_t i, std::size_t j) const;

  const std::optional<CommunityLabels>& labels() const { return labels_; }
  void set_labels(CommunityLabels labels);

  /// Dense symmetric 0/1 adjacency. Refused above kMaxDenseNodes.
  Eigen::MatrixXd dense_adjacency() const;

  static constexpr std::size_t kMaxDenseNodes = 5000;

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::optional<CommunityLabels> labels_;
};

/// Draws each unordered pair independently with probability theta_i theta_j P_{c_i c_j}.
/// A pair probability above one is an error, never clipped.
Network generate_network(const DCSBMParams& params, const CommunityLabels& labels, Rng& rng);

/// scale * (off_diag everywhere, a_k on the diagonal).
Eigen::MatrixXd sbm_weight_matrix(const std::vector<double>& a, double off_diag, double scale);

/// Source of unnormalized degree parameters.
struct ThetaSource {
  enum class Kind { kConstant, kPoissonPlusOne, kTruncatedPareto, kExplicit };
  Kind kind = Kind::kConstant;
  double mean = 5.0;   // Poisson mean
  double alpha = 2.5;  // Pareto tail index (scale 1)
  double cap = 4.0;    // Pareto truncation point
  std::vector<double> values;

  /// Parses "constant", "poisson(5)", "pareto(2.5,4)".
  static ThetaSource parse(const std::string& spec);
  std::string describe() const;
  std::vector<double> draw(std::size_t n, Rng& rng) const;
};

/// SBM-1/2/3 and the time-horizon DCSBM used in the synthetic experiments.
DCSBMParams sbm_preset(const std::vector<double>& diagonal_weights, std::size_t n = 1000);
Eigen::MatrixXd dcsbm_time_preset_matrix();

}  // namespace fairspread
