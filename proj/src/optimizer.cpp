#include "fairspread/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "fairspread/error.hpp"
#include "fairspread/parallel.hpp"

namespace fairspread {

UniqueClasses collapse_classes(const DCSBMParams& params, const CommunityLabels& labels,
                               double theta_tol) {
  if (labels.size() != params.n || params.theta.size() != params.n)
    throw Error("labels and theta must cover all n nodes");
  if (theta_tol < 0.0) throw Error("theta tolerance must be nonnegative");
  UniqueClasses classes;
  classes.class_of.resize(params.n);
  std::map<std::pair<int, double>, std::size_t> index;
  for (std::size_t i = 0; i < params.n; ++i) {
    const double th = params.theta[i];
    const double key = theta_tol > 0.0 ? std::round(th / theta_tol) : th;
    auto [it, inserted] = index.try_emplace({labels[i], key}, classes.weight.size());
    if (inserted) {
      classes.weight.push_back(0);
      classes.community.push_back(labels[i]);
      classes.theta.push_back(th);
      classes.members.emplace_back();
    }
    const std::size_t j = it->second;
    classes.class_of[i] = j;
    ++classes.weight[j];
    classes.members[j].push_back(i);
  }
  return classes;
}

Eigen::VectorXd project_feasible(const Eigen::VectorXd& z, const Eigen::VectorXd& w, double budget) {
  if (z.size() != w.size()) throw Error("projection dimension mismatch");
  auto clip = [&](double mu) { return (z - mu * w).cwiseMax(0.0).cwiseMin(1.0).eval(); };
  Eigen::VectorXd y = clip(0.0);
  if (w.dot(y) <= budget) return y;
  // w^T clip(z - mu w) is nonincreasing in mu; bisect for the budget level.
  double lo = 0.0;
  double hi = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (w(j) > 0.0) hi = std::max(hi, z(j) / w(j));
  for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (w.dot(clip(mid)) > budget)
      lo = mid;
    else
      hi = mid;
  }
  return clip(hi);
}

namespace {

struct SingleRun {
  Eigen::VectorXd x;
  ObjectiveValue value;
  double start_value = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

void require_finite(const ObjectiveValue& v, const Eigen::VectorXd& x) {
  if (std::isfinite(v.f)) return;
  std::ostringstream os;
  os << "non-finite objective at x = [" << x.transpose() << "]";
  throw Error(os.str());
}

SingleRun spg_ascent(const LinearizedObjective& objective, const Eigen::VectorXd& w, double budget,
                     Eigen::VectorXd x, const SolverOptions& options) {
  constexpr double kArmijo = 1e-4;
  constexpr double kStepMin = 1e-12;
  constexpr double kStepMax = 1e12;

  SingleRun run;
  x = project_feasible(x, w, budget);
  ObjectiveValue val = objective.value(x);
  require_finite(val, x);
  run.start_value = val.f;
  Eigen::VectorXd g = objective.gradient(x);

  double step = 1.0 / std::max(g.lpNorm<Eigen::Infinity>(), 1e-12);
  step = std::clamp(step, kStepMin, kStepMax);
  for (; run.iterations < options.max_iter; ++run.iterations) {
    run.pg_norm = (project_feasible(x + g, w, budget) - x).norm();
    if (run.pg_norm < options.gtol) {
      run.converged = true;
      break;
    }
    const Eigen::VectorXd d = project_feasible(x + step * g, w, budget) - x;
    const double slope = g.dot(d);
    if (!(slope > 0.0)) break;

    double tau = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    ObjectiveValue val_new;
    for (int ls = 0; ls < 60; ++ls, tau *= 0.5) {
      x_new = x + tau * d;
      val_new = objective.value(x_new);
      require_finite(val_new, x_new);
      if (val_new.f >= val.f + kArmijo * tau * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further ascent at machine precision

    const Eigen::VectorXd g_new = objective.gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    // Barzilai-Borwein step for the minimization of -f.
    const double curvature = -s.dot(g_new - g);
    step = curvature > 0.0 ? std::clamp(s.squaredNorm() / curvature, kStepMin, kStepMax) : kStepMax;
    x = std::move(x_new);
    val = std::move(val_new);
    g = g_new;
  }
  if (!run.converged) run.pg_norm = (project_feasible(x + g, w, budget) - x).norm();
  run.x = std::move(x);
  run.value = std::move(val);
  return run;
}

}  // namespace

RelaxedSolution solve_relaxed(const LinearizedObjective& objective, const UniqueClasses& classes,
                              const Eigen::VectorXd& x0, const SolverOptions& options) {
  const std::size_t v = classes.num_classes();
  if (objective.dimension() != v) throw Error("objective and classes disagree on dimension");
  if (options.restarts < 1) throw Error("need at least one start");
  const Eigen::VectorXd w = classes.weights();
  const auto budget = static_cast<double>(objective.config().M);
  const auto n = static_cast<double>(classes.num_nodes());

  std::vector<Eigen::VectorXd> starts;
  if (x0.size() > 0) {
    if (static_cast<std::size_t>(x0.size()) != v) throw Error("start has wrong dimension");
    if ((x0.array() < -1e-9).any() || (x0.array() > 1.0 + 1e-9).any() || w.dot(x0) > budget + 1e-6)
      throw Error("start point is infeasible");
    starts.push_back(x0);
  } else {
    starts.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(v), budget / n));
  }
  for (int r = 1; r < options.restarts; ++r) {
    Rng rng = derive_rng(options.seed, {static_cast<std::uint64_t>(r)});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(v));
    for (auto& e : u) e = unif(rng);
    const double scale = budget / std::max(w.dot(u), 1e-300);
    starts.push_back(project_feasible(u * std::min(scale, 1.0 / u.maxCoeff()), w, budget));
  }

  std::vector<SingleRun> runs(starts.size());
  parallel_for(starts.size(), [&](std::size_t r) { runs[r] = spg_ascent(objective, w, budget, starts[r], options); });

  RelaxedSolution out;
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out.start_values.push_back(runs[r].start_value);
    out.final_values.push_back(runs[r].value.f);
    if (runs[r].value.f > runs[best].value.f) best = r;
  }
  const SingleRun& win = runs[best];
  out.x = win.x;
  out.value = win.value;
  out.iterations = win.iterations;
  out.projected_gradient_norm = win.pg_norm;
  out.converged = win.converged;
  out.best_start = static_cast<int>(best);
  for (Eigen::Index j = 0; j < out.x.size(); ++j) {
    if (out.x(j) <= 1e-12) ++out.active_lower;
    if (out.x(j) >= 1.0 - 1e-12) ++out.active_upper;
  }
  out.budget_active = w.dot(out.x) >= budget - 1e-6;
  return out;
}

std::vector<std::size_t> round_allocation(const Eigen::VectorXd& x_star,
                                          const std::vector<std::size_t>& weights, std::size_t M) {
  if (static_cast<std::size_t>(x_star.size()) != weights.size()) throw Error("x and w differ in length");
  const std::size_t n = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  if (M > n) throw Error("seed budget " + std::to_string(M) + " exceeds node count " + std::to_string(n));
  const std::size_t v = weights.size();
  std::vector<std::size_t> y(v);
  std::vector<double> scaled(v);
  std::size_t total = 0;
  for (std::size_t j = 0; j < v; ++j) {
    const double xj = std::clamp(x_star(static_cast<Eigen::Index>(j)), 0.0, 1.0);
    scaled[j] = static_cast<double>(weights[j]) * xj;
    y[j] = std::min(weights[j], static_cast<std::size_t>(std::floor(scaled[j] + 1e-9)));
    total += y[j];
  }
  if (total > M) throw Error("relaxed solution exceeds the seed budget");
  while (total < M) {
    std::size_t pick = v;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < v; ++j) {
      if (y[j] >= weights[j]) continue;
      const double gap = scaled[j] - static_cast<double>(y[j]);
      if (gap > best) {
        best = gap;
        pick = j;
      }
    }
    ++y[pick];
    ++total;
  }
  return y;
}

SeedMask expand_seeds(const std::vector<std::size_t>& y, const UniqueClasses& classes, Rng& rng) {
  if (y.size() != classes.num_classes()) throw Error("allocation and classes differ in length");
  SeedMask seeds(classes.num_nodes(), 0);
  std::vector<std::size_t> chosen;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] > classes.weight[j]) throw Error("class " + std::to_string(j) + " has fewer nodes than seeds");
    chosen.clear();
    std::sample(classes.members[j].begin(), classes.members[j].end(), std::back_inserter(chosen), y[j], rng);
    for (std::size_t i : chosen) seeds[i] = 1;
  }
  return seeds;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kProposed: return "proposed";
    case Strategy::kEqual: return "equal";
    case Strategy::kProportional: return "proportional";
    case Strategy::kLargest: return "largest";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "proposed") return Strategy::kProposed;
  if (name == "equal") return Strategy::kEqual;
  if (name == "proportional") return Strategy::kProportional;
  if (name == "largest") return Strategy::kLargest;
  throw Error("unknown strategy: " + name);
}

std::vector<std::size_t> baseline_allocation(Strategy strategy,
                                             const std::vector<std::size_t>& community_sizes,
                                             std::size_t M) {
  const std::size_t K = community_sizes.size();
  if (K == 0) throw Error("no communities");
  const std::size_t n = std::accumulate(community_sizes.begin(), community_sizes.end(), std::size_t{0});
  if (M > n) throw Error("seed budget exceeds node count");

  // Communities by decreasing size, lowest index first on ties.
  std::vector<std::size_t> by_size(K);
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) { return community_sizes[a] > community_sizes[b]; });

  std::vector<std::size_t> y(K, 0);
  switch (strategy) {
    case Strategy::kEqual: {
      std::size_t left = M;
      for (std::size_t k = 0; k < K; ++k) {
        y[k] = std::min(M / K, community_sizes[k]);
        left -= y[k];
      }
      // Remainder (and any share a small community cannot hold) goes to the largest first.
      while (left > 0) {
        for (std::size_t k : by_size) {
          if (left == 0) break;
          if (y[k] < community_sizes[k]) {
            ++y[k];
            --left;
          }
        }
      }
      break;
    }
    case Strategy::kProportional: {
      std::vector<double> w(community_sizes.begin(), community_sizes.end());
      y = apportion(w, M);
      break;
    }
    case Strategy::kLargest: {
      std::size_t left = M;
      for (std::size_t k : by_size) {
        y[k] = std::min(left, community_sizes[k]);
        left -= y[k];
      }
      break;
    }
    case Strategy::kProposed:
      throw Error("the proposed strategy is not a baseline");
  }
  return y;
}

Eigen::VectorXd community_allocation_to_relaxed(const std::vector<std::size_t>& y_community,
                                                const UniqueClasses& classes) {
  std::vector<double> sizes(y_community.size(), 0.0);
  for (std::size_t j = 0; j < classes.num_classes(); ++j) {
    const auto k = static_cast<std::size_t>(classes.community[j]);
    if (k >= sizes.size()) throw Error("class community out of range");
    sizes[k] += static_cast<double>(classes.weight[j]);
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(classes.num_classes()));
  for (std::size_t j = 0; j < classes.num_classes(); ++j) {
    const auto k = static_cast<std::size_t>(classes.community[j]);
    x(static_cast<Eigen::Index>(j)) = static_cast<double>(y_community[k]) / sizes[k];
  }
  return x;
}

std::vector<std::size_t> class_counts_by_community(const std::vector<std::size_t>& y,
                                                   const UniqueClasses& classes, int K) {
  std::vector<std::size_t> out(static_cast<std::size_t>(K), 0);
  for (std::size_t j = 0; j < y.size(); ++j) out.at(static_cast<std::size_t>(classes.community[j])) += y[j];
  return out;
}

}  // namespace fairspread
