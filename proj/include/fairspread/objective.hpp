#pragma once

// Entropy fairness and the linearized coverage objective
// f~(x) = m~(x) + lambda * H(p~(x)) with its analytic gradient.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fairspread/classes.hpp"
#include "fairspread/spread.hpp"

namespace fairspread {

struct ObjectiveConfig {
  double lambda = 3.0;
  int t = 1;
  std::size_t M = 30;
  double epsilon = 1e-9;  // floor for normalization and inside log

  /// Throws Error when lambda < 0, t < 0, M == 0, M > n or epsilon outside (0, 1e-6].
  void check(std::size_t n) const;
};

/// -sum p_k log_K p_k with 0 log 0 = 0. A single community has entropy 0.
double entropy(std::span<const double> p);

/// q / sum(q), or the uniform vector when sum(q) < epsilon.
std::vector<double> normalize_coverage(std::span<const double> q, double epsilon,
                                       bool* degenerate = nullptr);

/// Gini coefficient sum_ij |x_i - x_j| / (2 n sum_j x_j); reporting only.
double gini(std::span<const double> x);

struct ObjectiveValue {
  double f = 0.0;
  double m = 0.0;  // predicted overall proportion
  double H = 0.0;  // entropy of p
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  bool degenerate = false;  // uniform fallback used
};

/// Evaluates f~ by expanding s = V x and pushing it through Psi^t.
ObjectiveValue objective_value(const SpreadOperator& op, const std::vector<double>& pi,
                               const Eigen::VectorXd& x, const UniqueClasses& classes,
                               const ObjectiveConfig& config);

/// Analytic gradient of f~ with respect to x, through one transposed power of Psi.
Eigen::VectorXd objective_gradient(const SpreadOperator& op, const std::vector<double>& pi,
                                   const Eigen::VectorXd& x, const UniqueClasses& classes,
                                   const ObjectiveConfig& config);

/// f~ over classes with the K x v map x -> q~ precomputed, used by the solver.
class LinearizedObjective {
 public:
  LinearizedObjective(const SpreadOperator& op, const std::vector<double>& pi,
                      const UniqueClasses& classes, const ObjectiveConfig& config);

  std::size_t dimension() const { return static_cast<std::size_t>(coverage_map_.cols()); }
  const Eigen::MatrixXd& coverage_map() const { return coverage_map_; }
  const ObjectiveConfig& config() const { return config_; }

  ObjectiveValue value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd coverage_map_;  // A with q~ = A x
  std::vector<double> pi_;
  ObjectiveConfig config_;
};

/// Assembles value and components from predicted community coverage q~.
ObjectiveValue objective_from_coverage(const Eigen::VectorXd& q, const std::vector<double>& pi,
                                       const ObjectiveConfig& config);

/// d f~ / d q~ given q~ (the outer chain-rule factor).
Eigen::VectorXd objective_coverage_gradient(const Eigen::VectorXd& q, const std::vector<double>& pi,
                                            const ObjectiveConfig& config);

}  // namespace fairspread
