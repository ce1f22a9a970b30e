#pragma once

// Seed allocation: collapse identical nodes into classes, maximize the relaxed
// objective over {x in [0,1]^v : w^T x <= M}, round to integer seed counts and
// expand them to nodes. Also the equal/proportional/largest baselines.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairspread/classes.hpp"
#include "fairspread/model.hpp"
#include "fairspread/objective.hpp"
#include "fairspread/rng.hpp"
#include "fairspread/spread.hpp"

namespace fairspread {

/// Groups nodes by (community, theta) with theta compared after rounding to
/// multiples of theta_tol (exact match when theta_tol == 0). Classes are
/// numbered in order of their lowest node index.
UniqueClasses collapse_classes(const DCSBMParams& params, const CommunityLabels& labels,
                               double theta_tol = 1e-9);

struct SolverOptions {
  int restarts = 5;  // uniform start plus restarts - 1 random feasible starts
  double gtol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct RelaxedSolution {
  Eigen::VectorXd x;
  ObjectiveValue value;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
  bool converged = false;
  std::size_t active_lower = 0;  // x_j == 0
  std::size_t active_upper = 0;  // x_j == 1
  bool budget_active = false;
  int best_start = 0;
  std::vector<double> start_values;  // f~ at each start, for the ascent check
  std::vector<double> final_values;  // f~ at each restart's end point
};

/// Euclidean projection onto {x in [0,1]^v : w^T x <= budget}.
Eigen::VectorXd project_feasible(const Eigen::VectorXd& z, const Eigen::VectorXd& w, double budget);

/// Spectral projected-gradient ascent with Armijo backtracking, run from
/// several starts; the best end point wins. If x0 is empty the uniform start
/// x_j = M/n is used as the first start.
RelaxedSolution solve_relaxed(const LinearizedObjective& objective, const UniqueClasses& classes,
                              const Eigen::VectorXd& x0 = Eigen::VectorXd(),
                              const SolverOptions& options = {});

/// y_j = floor(w_j x_j), then one seed at a time to argmax_j (w_j x_j - y_j)
/// (lowest index on ties, never beyond w_j) until sum y = M.
std::vector<std::size_t> round_allocation(const Eigen::VectorXd& x_star,
                                          const std::vector<std::size_t>& weights, std::size_t M);

/// Marks a uniformly random subset of y_j nodes in each class.
SeedMask expand_seeds(const std::vector<std::size_t>& y, const UniqueClasses& classes, Rng& rng);

enum class Strategy { kProposed, kEqual, kProportional, kLargest };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

/// Per-community seed counts for the baseline strategies.
std::vector<std::size_t> baseline_allocation(Strategy strategy,
                                             const std::vector<std::size_t>& community_sizes,
                                             std::size_t M);

/// Per-community allocation spread evenly over the classes of each community:
/// x_j = y_k / n_k for every class j in community k.
Eigen::VectorXd community_allocation_to_relaxed(const std::vector<std::size_t>& y_community,
                                                const UniqueClasses& classes);

/// Sums class counts into community counts.
std::vector<std::size_t> class_counts_by_community(const std::vector<std::size_t>& y,
                                                   const UniqueClasses& classes, int K);

}  // namespace fairspread
