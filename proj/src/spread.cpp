#include "fairspread/spread.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fairspread/error.hpp"
#include "fairspread/objective.hpp"
#include "fairspread/parallel.hpp"

namespace fairspread {

namespace {

constexpr double kEntryTol = 1e-12;

void check_probability(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(what) + " must lie in [0,1]");
}

void check_seeds(const SeedMask& seeds, std::size_t n) {
  if (seeds.size() != n) throw Error("seed vector length does not match node count");
  for (auto v : seeds)
    if (v > 1) throw Error("seed vector must be binary");
}

}  // namespace

Eigen::VectorXd to_vector(const SeedMask& seeds) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(seeds.size()));
  for (std::size_t i = 0; i < seeds.size(); ++i) s(static_cast<Eigen::Index>(i)) = seeds[i] ? 1.0 : 0.0;
  return s;
}

TransmissionSpec TransmissionSpec::scalar(double beta) {
  check_probability(beta, "beta");
  TransmissionSpec spec;
  spec.scalar_ = true;
  spec.value_ = beta;
  return spec;
}

TransmissionSpec TransmissionSpec::block(Eigen::MatrixXd betas) {
  if (betas.rows() != betas.cols() || betas.rows() == 0) throw Error("beta block matrix must be square");
  for (Eigen::Index k = 0; k < betas.rows(); ++k)
    for (Eigen::Index l = 0; l < betas.cols(); ++l) {
      check_probability(betas(k, l), "beta block entry");
      if (std::abs(betas(k, l) - betas(l, k)) > 1e-12) throw Error("beta block matrix must be symmetric");
    }
  TransmissionSpec spec;
  spec.scalar_ = false;
  spec.block_ = std::move(betas);
  return spec;
}

TransmissionSpec TransmissionSpec::within_between(int K, double within, double between) {
  check_probability(within, "within-community beta");
  check_probability(between, "between-community beta");
  Eigen::MatrixXd B = Eigen::MatrixXd::Constant(K, K, between);
  B.diagonal().setConstant(within);
  return block(std::move(B));
}

Eigen::MatrixXd TransmissionSpec::block_matrix(int K) const {
  if (scalar_) return Eigen::MatrixXd::Constant(K, K, value_);
  if (block_.rows() != K) throw Error("beta block matrix does not match community count");
  return block_;
}

ActivationTrace simulate_ic(const Network& network, const TransmissionSpec& tspec,
                            const SeedMask& seeds, int t, Rng& rng) {
  const std::size_t n = network.num_nodes();
  check_seeds(seeds, n);
  if (t < 0) throw Error("time horizon must be nonnegative");
  if (!tspec.is_scalar() && !network.labels()) throw Error("block transmission needs community labels");

  // Live-edge coins for every directed transmission, drawn in adjacency order.
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) offset[u + 1] = offset[u] + network.degree(u);
  std::vector<std::uint8_t> live(offset[n]);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& nbrs = network.neighbors(u);
    for (std::size_t a = 0; a < nbrs.size(); ++a) {
      const double beta =
          tspec.is_scalar() ? tspec.beta(0, 0) : tspec.beta((*network.labels())[u], (*network.labels())[nbrs[a]]);
      live[offset[u] + a] = unif(rng) < beta;
    }
  }

  ActivationTrace trace;
  trace.horizon = t;
  trace.activated_at.assign(n, ActivationTrace::kNever);
  trace.frontiers.emplace_back();
  for (std::size_t i = 0; i < n; ++i) {
    if (seeds[i]) {
      trace.activated_at[i] = 0;
      trace.frontiers[0].push_back(i);
    }
  }
  for (int step = 1; step <= t && !trace.frontiers.back().empty(); ++step) {
    std::vector<std::size_t> next;
    for (std::size_t u : trace.frontiers.back()) {
      const auto& nbrs = network.neighbors(u);
      for (std::size_t a = 0; a < nbrs.size(); ++a) {
        const std::size_t v = nbrs[a];
        if (trace.activated_at[v] != ActivationTrace::kNever || !live[offset[u] + a]) continue;
        trace.activated_at[v] = step;
        next.push_back(v);
      }
    }
    std::sort(next.begin(), next.end());
    trace.frontiers.push_back(std::move(next));
  }
  return trace;
}

CoverageSummary coverage(const ActivationTrace& trace, const CommunityLabels& labels, int t,
                         SeedCounting counting) {
  if (trace.activated_at.size() != labels.size()) throw Error("trace and labels cover different node sets");
  if (t < 0 || t > trace.horizon) throw Error("coverage time exceeds trace horizon");
  const auto K = static_cast<std::size_t>(labels.num_communities());
  const int first_step = counting == SeedCounting::kIncludeSeeds ? 0 : 1;
  std::vector<double> active(K, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int at = trace.activated_at[i];
    if (at != ActivationTrace::kNever && at >= first_step && at <= t)
      active[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  CoverageSummary out;
  out.q.assign(K, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto nk = static_cast<double>(labels.community_sizes()[k]);
    out.q[k] = nk > 0 ? active[k] / nk : 0.0;
    total += active[k];
  }
  out.m = labels.size() > 0 ? total / static_cast<double>(labels.size()) : 0.0;
  // Realized coverage has no smoothing floor: an all-zero q falls back to uniform.
  out.p = normalize_coverage(out.q, std::numeric_limits<double>::min());
  out.H = entropy(out.p);
  return out;
}

std::vector<Eigen::VectorXd> exact_activation_history(const DCSBMParams& params,
                                                      const CommunityLabels& labels,
                                                      const TransmissionSpec& tspec,
                                                      const SeedMask& seeds, int t) {
  require_valid(params);
  check_seeds(seeds, params.n);
  if (t < 0) throw Error("time horizon must be nonnegative");
  if (labels.size() != params.n) throw Error("labels do not match n");
  const auto n = static_cast<Eigen::Index>(params.n);
  const Eigen::MatrixXd B = tspec.block_matrix(params.K).cwiseProduct(params.P);

  // Pairwise one-step transmission probabilities.
  Eigen::MatrixXd psi(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      psi(i, j) = i == j ? 0.0 : params.theta[i] * params.theta[j] * B(labels[i], labels[j]);

  std::vector<Eigen::VectorXd> cumulative;
  cumulative.push_back(to_vector(seeds));
  Eigen::VectorXd survive = Eigen::VectorXd::Ones(n);  // prod over earlier steps of no-transmission
  for (int r = 0; r < t; ++r) {
    const Eigen::VectorXd step = r == 0 ? cumulative[0] : Eigen::VectorXd(cumulative[r] - cumulative[r - 1]);
    Eigen::VectorXd next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double prod = 1.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i && step(j) != 0.0) prod *= 1.0 - psi(i, j) * step(j);
      survive(i) *= prod;
      next(i) = seeds[static_cast<std::size_t>(i)] ? 1.0 : 1.0 - survive(i);
    }
    cumulative.push_back(std::move(next));
  }
  return cumulative;
}

Eigen::VectorXd exact_activation_probs(const DCSBMParams& params, const CommunityLabels& labels,
                                       const TransmissionSpec& tspec, const SeedMask& seeds, int t) {
  if (t < 1) throw Error("exact activation probabilities need t >= 1");
  return exact_activation_history(params, labels, tspec, seeds, t).back();
}

std::vector<Eigen::VectorXd> per_step_probabilities(const std::vector<Eigen::VectorXd>& cumulative) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(cumulative.size());
  for (std::size_t r = 0; r < cumulative.size(); ++r)
    out.push_back(r == 0 ? cumulative[0] : Eigen::VectorXd(cumulative[r] - cumulative[r - 1]));
  return out;
}

Eigen::VectorXd ClassSpreadMap::apply_power(const Eigen::VectorXd& x, int t) const {
  Eigen::VectorXd u = x;
  for (int r = 0; r < t; ++r) u = map_ * u;
  return u;
}

SpreadOperator SpreadOperator::build(const DCSBMParams& params, const CommunityLabels& labels,
                                     const TransmissionSpec& tspec, Storage storage) {
  require_valid(params);
  if (labels.size() != params.n || labels.num_communities() != params.K)
    throw Error("labels do not match the parameters");
  SpreadOperator op;
  op.labels_ = labels;
  op.theta_ = params.theta;
  op.block_ = tspec.block_matrix(params.K).cwiseProduct(params.P);

  // Largest entry per community pair comes from the two largest theta values.
  const auto K = static_cast<std::size_t>(params.K);
  std::vector<double> top1(K, 0.0), top2(K, 0.0);
  for (std::size_t i = 0; i < params.n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    const double th = params.theta[i];
    if (th > top1[k]) {
      top2[k] = top1[k];
      top1[k] = th;
    } else if (th > top2[k]) {
      top2[k] = th;
    }
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < K; ++l) {
      const double worst = top1[k] * (k == l ? top2[k] : top1[l]) *
                           op.block_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (worst > 1.0 + kEntryTol)
        throw Error("spread operator entry " + std::to_string(worst) + " > 1 in block (" +
                    std::to_string(k) + "," + std::to_string(l) + ")");
    }

  const bool want_dense = storage == Storage::kDense ||
                          (storage == Storage::kAuto && params.n <= Network::kMaxDenseNodes);
  if (want_dense) {
    if (params.n > Network::kMaxDenseNodes) throw Error("dense spread operator refused for n > 5000");
    const auto n = static_cast<Eigen::Index>(params.n);
    op.dense_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        op.dense_(i, j) = i == j ? 0.0 : op.theta_[i] * op.theta_[j] * op.block_(labels[i], labels[j]);
  }
  return op;
}

double SpreadOperator::entry(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return theta_[i] * theta_[j] * block_(labels_[i], labels_[j]);
}

Eigen::VectorXd SpreadOperator::apply_factored(const Eigen::VectorXd& s, bool transpose) const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(s.size()) != n) throw Error("vector length does not match operator");
  const Eigen::Index K = block_.rows();
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(K);
  for (std::size_t j = 0; j < n; ++j) mass(labels_[j]) += theta_[j] * s(static_cast<Eigen::Index>(j));
  const Eigen::VectorXd pushed = transpose ? Eigen::VectorXd(block_.transpose() * mass) : Eigen::VectorXd(block_ * mass);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const int c = labels_[i];
    out(ii) = theta_[i] * (pushed(c) - theta_[i] * block_(c, c) * s(ii));
  }
  return out;
}

Eigen::VectorXd SpreadOperator::apply(const Eigen::VectorXd& s) const {
  if (has_dense()) {
    if (s.size() != dense_.cols()) throw Error("vector length does not match operator");
    return dense_ * s;
  }
  return apply_factored(s, false);
}

Eigen::VectorXd SpreadOperator::apply_transpose(const Eigen::VectorXd& s) const {
  if (has_dense()) {
    if (s.size() != dense_.rows()) throw Error("vector length does not match operator");
    return dense_.transpose() * s;
  }
  return apply_factored(s, true);
}

Eigen::VectorXd SpreadOperator::apply_power(const Eigen::VectorXd& s, int t) const {
  if (t < 0) throw Error("time horizon must be nonnegative");
  Eigen::VectorXd u = s;
  for (int r = 0; r < t; ++r) u = apply(u);
  return u;
}

Eigen::VectorXd SpreadOperator::apply_transpose_power(const Eigen::VectorXd& s, int t) const {
  if (t < 0) throw Error("time horizon must be nonnegative");
  Eigen::VectorXd u = s;
  for (int r = 0; r < t; ++r) u = apply_transpose(u);
  return u;
}

ClassSpreadMap SpreadOperator::compress(const std::vector<std::size_t>& class_of,
                                        std::size_t num_classes) const {
  if (class_of.size() != size()) throw Error("class assignment does not cover every node");
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rep(num_classes, kUnset);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < class_of.size(); ++i) {
    const std::size_t j = class_of[i];
    if (j >= num_classes) throw Error("class index out of range");
    if (rep[j] == kUnset) {
      rep[j] = i;
    } else if (labels_[rep[j]] != labels_[i] || std::abs(theta_[rep[j]] - theta_[i]) > 1e-9 * theta_[i]) {
      throw Error("class " + std::to_string(j) + " mixes non-identical nodes");
    }
    w(static_cast<Eigen::Index>(j)) += 1.0;
  }
  const auto v = static_cast<Eigen::Index>(num_classes);
  Eigen::MatrixXd C(v, v);
  for (Eigen::Index a = 0; a < v; ++a) {
    if (rep[static_cast<std::size_t>(a)] == kUnset) throw Error("empty class");
    for (Eigen::Index b = 0; b < v; ++b) {
      const std::size_t i = rep[static_cast<std::size_t>(a)];
      const std::size_t j = rep[static_cast<std::size_t>(b)];
      const double pair = theta_[i] * theta_[j] * block_(labels_[i], labels_[j]);
      C(a, b) = pair * (w(b) - (a == b ? 1.0 : 0.0));
    }
  }
  return ClassSpreadMap(std::move(C), std::move(w));
}

SpreadOperator build_psi(const DCSBMParams& params, const CommunityLabels& labels,
                         const TransmissionSpec& tspec) {
  return SpreadOperator::build(params, labels, tspec);
}

double approx_total(const SpreadOperator& op, const Eigen::VectorXd& s, int t) {
  return op.apply_power(s, t).sum() / static_cast<double>(op.size());
}

Eigen::VectorXd approx_by_community(const SpreadOperator& op, const CommunityLabels& labels,
                                    const std::vector<double>& pi, const Eigen::VectorXd& s, int t) {
  if (labels.size() != op.size()) throw Error("labels do not match operator");
  if (pi.size() != static_cast<std::size_t>(labels.num_communities())) throw Error("pi does not match labels");
  const Eigen::VectorXd reached = op.apply_power(s, t);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pi.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) q(labels[i]) += reached(static_cast<Eigen::Index>(i));
  const auto n = static_cast<double>(op.size());
  for (std::size_t k = 0; k < pi.size(); ++k) q(static_cast<Eigen::Index>(k)) /= pi[k] * n;
  return q;
}

Eigen::VectorXd MonteCarloEstimate::standard_error() const {
  const double r = static_cast<double>(runs);
  return (probability.array() * (1.0 - probability.array()) / r).sqrt().matrix();
}

namespace {

// Splits runs into fixed chunks with their own generator streams so the
// result does not depend on the worker count.
template <typename RunOnce>
MonteCarloEstimate run_chunks(std::size_t n, std::size_t runs, std::uint64_t seed, RunOnce&& once) {
  constexpr std::size_t kChunks = 64;
  std::vector<Eigen::VectorXd> counts(kChunks, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  parallel_for(kChunks, [&](std::size_t c) {
    Rng rng = derive_rng(seed, {c});
    const std::size_t begin = runs * c / kChunks;
    const std::size_t end = runs * (c + 1) / kChunks;
    for (std::size_t r = begin; r < end; ++r) {
      const ActivationTrace trace = once(rng);
      for (std::size_t i = 0; i < n; ++i)
        if (trace.activated_at[i] != ActivationTrace::kNever) counts[c](static_cast<Eigen::Index>(i)) += 1.0;
    }
  });
  MonteCarloEstimate est;
  est.runs = runs;
  est.probability = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& c : counts) est.probability += c;
  est.probability /= static_cast<double>(runs);
  return est;
}

}  // namespace

MonteCarloEstimate monte_carlo_resampled(const DCSBMParams& params, const CommunityLabels& labels,
                                         const TransmissionSpec& tspec, const SeedMask& seeds,
                                         int t, std::size_t runs, std::uint64_t seed) {
  if (runs == 0) throw Error("need at least one run");
  return run_chunks(params.n, runs, seed, [&](Rng& rng) {
    const Network net = generate_network(params, labels, rng);
    return simulate_ic(net, tspec, seeds, t, rng);
  });
}

MonteCarloEstimate monte_carlo_fixed(const Network& network, const TransmissionSpec& tspec,
                                     const SeedMask& seeds, int t, std::size_t runs,
                                     std::uint64_t seed) {
  if (runs == 0) throw Error("need at least one run");
  return run_chunks(network.num_nodes(), runs, seed,
                    [&](Rng& rng) { return simulate_ic(network, tspec, seeds, t, rng); });
}

void write_trace_csv(std::ostream& os, const ActivationTrace& trace, const CommunityLabels& labels) {
  if (trace.activated_at.size() != labels.size()) throw Error("trace and labels cover different node sets");
  os << "node,community,activation_time\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << i << ',' << labels[i] + 1 << ',';
    if (trace.activated_at[i] == ActivationTrace::kNever)
      os << "never";
    else
      os << trace.activated_at[i];
    os << '\n';
  }
}

}  // namespace fairspread
