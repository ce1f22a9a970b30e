#include "fairspread/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairspread/error.hpp"

namespace fairspread {

namespace {

constexpr double kProbabilityTol = 1e-9;

}  // namespace

Eigen::VectorXd UniqueClasses::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(weight.size()));
  for (std::size_t j = 0; j < weight.size(); ++j) w(static_cast<Eigen::Index>(j)) = static_cast<double>(weight[j]);
  return w;
}

Eigen::VectorXd UniqueClasses::expand(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != num_classes()) throw Error("relaxed vector has wrong dimension");
  Eigen::VectorXd s(static_cast<Eigen::Index>(class_of.size()));
  for (std::size_t i = 0; i < class_of.size(); ++i)
    s(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(class_of[i]));
  return s;
}

Eigen::VectorXd UniqueClasses::reduce(const Eigen::VectorXd& u) const {
  if (static_cast<std::size_t>(u.size()) != class_of.size()) throw Error("node vector has wrong dimension");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes()));
  for (std::size_t i = 0; i < class_of.size(); ++i)
    out(static_cast<Eigen::Index>(class_of[i])) += u(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::MatrixXd UniqueClasses::membership_matrix() const {
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(class_of.size()),
                                            static_cast<Eigen::Index>(num_classes()));
  for (std::size_t i = 0; i < class_of.size(); ++i)
    V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(class_of[i])) = 1.0;
  return V;
}

void ObjectiveConfig::check(std::size_t n) const {
  if (!(lambda >= 0.0)) throw Error("lambda must be nonnegative");
  if (t < 0) throw Error("time horizon must be nonnegative");
  if (M == 0) throw Error("seed budget must be positive");
  if (M > n) throw Error("seed budget " + std::to_string(M) + " exceeds node count " + std::to_string(n));
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw Error("epsilon must lie in (0, 1e-6]");
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw Error("entropy of an empty vector");
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0) throw Error("entropy: negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilityTol) throw Error("entropy: probabilities sum to " + std::to_string(sum));
  if (p.size() == 1) return 0.0;
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h / std::log(static_cast<double>(p.size()));
}

std::vector<double> normalize_coverage(std::span<const double> q, double epsilon, bool* degenerate) {
  if (q.empty()) throw Error("coverage vector is empty");
  double sum = 0.0;
  for (double v : q) {
    if (v < 0.0) throw Error("coverage entries must be nonnegative");
    sum += v;
  }
  const bool fallback = !(sum >= epsilon);
  if (degenerate) *degenerate = fallback;
  std::vector<double> p(q.size());
  for (std::size_t k = 0; k < q.size(); ++k)
    p[k] = fallback ? 1.0 / static_cast<double>(q.size()) : q[k] / sum;
  return p;
}

double gini(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double diff = 0.0;
  for (double a : x)
    for (double b : x) diff += std::abs(a - b);
  return diff / (2.0 * static_cast<double>(x.size()) * total);
}

ObjectiveValue objective_from_coverage(const Eigen::VectorXd& q, const std::vector<double>& pi,
                                       const ObjectiveConfig& config) {
  if (static_cast<std::size_t>(q.size()) != pi.size()) throw Error("dimension mismatch between q and pi");
  ObjectiveValue out;
  out.q = q;
  // Predicted q~ is nonnegative up to rounding; clamp tiny negatives before normalizing.
  std::vector<double> qv(q.data(), q.data() + q.size());
  for (auto& v : qv) v = std::max(v, 0.0);
  const auto p = normalize_coverage(qv, config.epsilon, &out.degenerate);
  out.p = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  out.H = entropy(p);
  out.m = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k) out.m += pi[k] * q(static_cast<Eigen::Index>(k));
  out.f = out.m + config.lambda * out.H;
  return out;
}

Eigen::VectorXd objective_coverage_gradient(const Eigen::VectorXd& q, const std::vector<double>& pi,
                                            const ObjectiveConfig& config) {
  const auto K = q.size();
  Eigen::VectorXd grad(K);
  for (Eigen::Index k = 0; k < K; ++k) grad(k) = pi[static_cast<std::size_t>(k)];
  if (config.lambda == 0.0 || K < 2) return grad;

  const double sum = q.cwiseMax(0.0).sum();
  if (!(sum >= config.epsilon)) return grad;  // uniform fallback is locally constant

  // H = -(1/log K) sum p log p with p = q / S:
  //   dH/dq_l = (-log p_l - H_nat) / (S log K), H_nat the natural-log entropy.
  const double logK = std::log(static_cast<double>(K));
  Eigen::VectorXd logp(K);
  double h_nat = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double p = std::max(q(k), 0.0) / sum;
    logp(k) = std::log(std::max(p, config.epsilon));
    if (p > 0.0) h_nat -= p * std::log(p);
  }
  for (Eigen::Index k = 0; k < K; ++k) grad(k) += config.lambda * (-logp(k) - h_nat) / (sum * logK);
  return grad;
}

ObjectiveValue objective_value(const SpreadOperator& op, const std::vector<double>& pi,
                               const Eigen::VectorXd& x, const UniqueClasses& classes,
                               const ObjectiveConfig& config) {
  if (classes.num_nodes() != op.size()) throw Error("classes do not cover the operator's nodes");
  const Eigen::VectorXd s = classes.expand(x);
  const Eigen::VectorXd q = approx_by_community(op, op.labels(), pi, s, config.t);
  return objective_from_coverage(q, pi, config);
}

Eigen::VectorXd objective_gradient(const SpreadOperator& op, const std::vector<double>& pi,
                                   const Eigen::VectorXd& x, const UniqueClasses& classes,
                                   const ObjectiveConfig& config) {
  const ObjectiveValue val = objective_value(op, pi, x, classes, config);
  const Eigen::VectorXd outer = objective_coverage_gradient(val.q, pi, config);
  // q~_k = z_k^T Psi^t V x / (pi_k n), so grad = V^T (Psi^T)^t u with u_i = outer_{c_i}/(pi_{c_i} n).
  const auto n = static_cast<double>(op.size());
  Eigen::VectorXd u(static_cast<Eigen::Index>(op.size()));
  for (std::size_t i = 0; i < op.size(); ++i) {
    const int c = op.labels()[i];
    u(static_cast<Eigen::Index>(i)) = outer(c) / (pi[static_cast<std::size_t>(c)] * n);
  }
  return classes.reduce(op.apply_transpose_power(u, config.t));
}

LinearizedObjective::LinearizedObjective(const SpreadOperator& op, const std::vector<double>& pi,
                                         const UniqueClasses& classes, const ObjectiveConfig& config)
    : pi_(pi), config_(config) {
  config_.check(op.size());
  if (classes.num_nodes() != op.size()) throw Error("classes do not cover the operator's nodes");
  if (pi.size() != static_cast<std::size_t>(op.num_communities())) throw Error("pi does not match operator");
  const auto K = static_cast<Eigen::Index>(pi.size());
  const auto n = static_cast<double>(op.size());
  coverage_map_.resize(K, static_cast<Eigen::Index>(classes.num_classes()));
  for (Eigen::Index k = 0; k < K; ++k) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.size()));
    for (std::size_t i = 0; i < op.size(); ++i)
      if (op.labels()[i] == k) z(static_cast<Eigen::Index>(i)) = 1.0;
    const Eigen::VectorXd row = classes.reduce(op.apply_transpose_power(z, config.t));
    coverage_map_.row(k) = row.transpose() / (pi[static_cast<std::size_t>(k)] * n);
  }
}

ObjectiveValue LinearizedObjective::value(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension()) throw Error("relaxed vector has wrong dimension");
  return objective_from_coverage(coverage_map_ * x, pi_, config_);
}

Eigen::VectorXd LinearizedObjective::gradient(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension()) throw Error("relaxed vector has wrong dimension");
  const Eigen::VectorXd q = coverage_map_ * x;
  return coverage_map_.transpose() * objective_coverage_gradient(q, pi_, config_);
}

}  // namespace fairspread
