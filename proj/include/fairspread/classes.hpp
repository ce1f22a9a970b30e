#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace fairspread {

/// Partition of nodes into classes of stochastically identical nodes
/// (same community and degree parameter). Seeds are allocated per class.
struct UniqueClasses {
  std::vector<std::size_t> class_of;  // length n, the column of V holding each node
  std::vector<std::size_t> weight;    // w_j = class sizes
  std::vector<int> community;         // per-class community
  std::vector<double> theta;          // per-class degree parameter
  std::vector<std::vector<std::size_t>> members;

  std::size_t num_nodes() const { return class_of.size(); }
  std::size_t num_classes() const { return weight.size(); }
  Eigen::VectorXd weights() const;
  /// s = V x.
  Eigen::VectorXd expand(const Eigen::VectorXd& x) const;
  /// V^T u.
  Eigen::VectorXd reduce(const Eigen::VectorXd& u) const;
  /// Dense n x v membership matrix.
  Eigen::MatrixXd membership_matrix() const;
};

}  // namespace fairspread
