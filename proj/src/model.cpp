#include "fairspread/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairspread/error.hpp"

namespace fairspread {

namespace {

constexpr double kPiSumTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;
constexpr double kIdentifiabilityTol = 1e-9;
constexpr double kProbabilityTol = 1e-12;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

CommunityLabels::CommunityLabels(std::vector<int> labels, int num_communities)
    : labels_(std::move(labels)), num_communities_(num_communities) {
  if (num_communities_ < 1) throw Error("community count must be positive");
  sizes_.assign(static_cast<std::size_t>(num_communities_), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const int c = labels_[i];
    if (c < 0 || c >= num_communities_) {
      throw Error("label of node " + std::to_string(i) + " out of range: " + std::to_string(c));
    }
    ++sizes_[static_cast<std::size_t>(c)];
  }
}

std::vector<std::size_t> CommunityLabels::members(int k) const {
  std::vector<std::size_t> out;
  out.reserve(sizes_.at(static_cast<std::size_t>(k)));
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == k) out.push_back(i);
  return out;
}

Eigen::MatrixXd CommunityLabels::membership_matrix() const {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels_.size()),
                                            num_communities_);
  for (std::size_t i = 0; i < labels_.size(); ++i) Z(static_cast<Eigen::Index>(i), labels_[i]) = 1.0;
  return Z;
}

bool DCSBMParams::is_sbm() const {
  return std::all_of(theta.begin(), theta.end(), [&](double v) { return v == theta.front(); });
}

std::vector<Violation> validate(const DCSBMParams& params, const CommunityLabels* labels) {
  std::vector<Violation> out;
  const auto K = static_cast<std::size_t>(std::max(params.K, 0));
  if (params.n == 0) out.push_back({"n", "node count must be positive"});
  if (params.K < 1) out.push_back({"K", "community count must be positive"});

  if (params.pi.size() != K) {
    out.push_back({"pi", "length " + std::to_string(params.pi.size()) + " != K=" + std::to_string(K)});
  } else {
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      sum += params.pi[k];
      if (!(params.pi[k] > 0.0))
        out.push_back({"pi", "pi[" + std::to_string(k) + "] = " + fmt_double(params.pi[k]) +
                                 " is not strictly positive"});
    }
    if (std::abs(sum - 1.0) > kPiSumTol) out.push_back({"pi", "pi sums to " + fmt_double(sum)});
  }

  if (static_cast<std::size_t>(params.P.rows()) != K || static_cast<std::size_t>(params.P.cols()) != K) {
    out.push_back({"P", "P must be K x K"});
  } else {
    for (Eigen::Index k = 0; k < params.P.rows(); ++k) {
      for (Eigen::Index l = 0; l < params.P.cols(); ++l) {
        const double v = params.P(k, l);
        if (!(v >= 0.0 && v <= 1.0))
          out.push_back({"P", "P[" + std::to_string(k) + "][" + std::to_string(l) + "] = " +
                                  fmt_double(v) + " outside [0,1]"});
        if (l > k && std::abs(v - params.P(l, k)) > kSymmetryTol)
          out.push_back({"P", "P not symmetric at (" + std::to_string(k) + "," + std::to_string(l) +
                                  "): " + fmt_double(v) + " vs " + fmt_double(params.P(l, k))});
      }
    }
  }

  if (params.theta.size() != params.n) {
    out.push_back({"theta", "length " + std::to_string(params.theta.size()) + " != n=" +
                                std::to_string(params.n)});
  } else {
    for (std::size_t i = 0; i < params.theta.size(); ++i)
      if (!(params.theta[i] > 0.0) || !std::isfinite(params.theta[i]))
        out.push_back({"theta", "theta[" + std::to_string(i) + "] = " + fmt_double(params.theta[i]) +
                                    " is not positive"});
  }

  if (labels == nullptr || !out.empty()) return out;

  if (labels->size() != params.n || static_cast<std::size_t>(labels->num_communities()) != K) {
    out.push_back({"labels", "labels do not match n or K"});
    return out;
  }

  // Per community: identifiability sum and the two largest theta values.
  std::vector<double> theta_sum(K, 0.0);
  std::vector<double> top1(K, 0.0), top2(K, 0.0);
  for (std::size_t i = 0; i < params.n; ++i) {
    const auto k = static_cast<std::size_t>((*labels)[i]);
    const double th = params.theta[i];
    theta_sum[k] += th;
    if (th > top1[k]) {
      top2[k] = top1[k];
      top1[k] = th;
    } else if (th > top2[k]) {
      top2[k] = th;
    }
  }
  const auto& sizes = labels->community_sizes();
  // A plain SBM (all theta equal) is exempt: realized sizes need not equal pi_k n.
  const bool sbm = params.is_sbm();
  for (std::size_t k = 0; k < K && !sbm; ++k) {
    if (sizes[k] == 0) continue;
    const double mean = theta_sum[k] / (params.pi[k] * static_cast<double>(params.n));
    if (std::abs(mean - 1.0) > kIdentifiabilityTol)
      out.push_back({"theta", "community " + std::to_string(k) +
                                  " violates identifiability: normalized theta sum = " + fmt_double(mean)});
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = k; l < K; ++l) {
      double worst = 0.0;
      if (k == l) {
        if (sizes[k] >= 2) worst = top1[k] * top2[k] * params.P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      } else if (sizes[k] > 0 && sizes[l] > 0) {
        worst = top1[k] * top1[l] * params.P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      }
      if (worst > 1.0 + kProbabilityTol)
        out.push_back({"theta", "edge probability " + fmt_double(worst) + " > 1 in block (" +
                                    std::to_string(k) + "," + std::to_string(l) + ")"});
    }
  }
  return out;
}

void require_valid(const DCSBMParams& params, const CommunityLabels* labels) {
  const auto violations = validate(params, labels);
  if (violations.empty()) return;
  std::string msg = "invalid DCSBM parameters:";
  for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
  throw Error(msg);
}

std::vector<double> normalize_theta(const std::vector<double>& theta_raw,
                                    const CommunityLabels& labels,
                                    const std::vector<double>& pi) {
  if (theta_raw.size() != labels.size()) throw Error("theta and labels differ in length");
  if (pi.size() != static_cast<std::size_t>(labels.num_communities()))
    throw Error("pi length does not match community count");
  const std::size_t n = theta_raw.size();
  const std::size_t K = pi.size();
  std::vector<double> sums(K, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(theta_raw[i] > 0.0)) throw Error("theta[" + std::to_string(i) + "] must be positive");
    sums[static_cast<std::size_t>(labels[i])] += theta_raw[i];
  }
  for (std::size_t k = 0; k < K; ++k)
    if (labels.community_sizes()[k] == 0) throw Error("community " + std::to_string(k) + " is empty");

  std::vector<double> theta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    theta[i] = theta_raw[i] * pi[k] * static_cast<double>(n) / sums[k];
  }
  return theta;
}

CommunityLabels sample_labels(const std::vector<double>& pi, std::size_t n, Rng& rng) {
  if (pi.empty()) throw Error("pi is empty");
  std::discrete_distribution<int> pick(pi.begin(), pi.end());
  std::vector<int> labels(n);
  for (auto& c : labels) c = pick(rng);
  return CommunityLabels(std::move(labels), static_cast<int>(pi.size()));
}

std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(sum > 0.0)) throw Error("apportion needs positive total weight");
  std::vector<std::size_t> out(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double quota = static_cast<double>(total) * weights[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    remainder[k] = quota - static_cast<double>(out[k]);
    assigned += out[k];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % order.size()) {
    ++out[order[r]];
    ++assigned;
  }
  return out;
}

CommunityLabels fixed_labels(const std::vector<double>& pi, std::size_t n) {
  const auto sizes = apportion(pi, n);
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t k = 0; k < sizes.size(); ++k) labels.insert(labels.end(), sizes[k], static_cast<int>(k));
  return CommunityLabels(std::move(labels), static_cast<int>(pi.size()));
}

Network::Network(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges) : n_(n) {
  for (auto& e : edges) {
    if (e.first >= n || e.second >= n) throw Error("edge endpoint out of range");
    if (e.first == e.second) throw Error("self-loop at node " + std::to_string(e.first));
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);
  adjacency_.assign(n, {});
  for (const auto& [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

bool Network::has_edge(std::size_t i, std::size_t j) const {
  const auto& list = adjacency_.at(i);
  return std::binary_search(list.begin(), list.end(), j);
}

void Network::set_labels(CommunityLabels labels) {
  if (labels.size() != n_) throw Error("label count does not match node count");
  labels_ = std::move(labels);
}

Eigen::MatrixXd Network::dense_adjacency() const {
  if (n_ > kMaxDenseNodes) throw Error("dense adjacency refused for n > 5000");
  const auto n = static_cast<Eigen::Index>(n_);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : edges_) {
    A(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = 1.0;
    A(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = 1.0;
  }
  return A;
}

Network generate_network(const DCSBMParams& params, const CommunityLabels& labels, Rng& rng) {
  require_valid(params);
  if (labels.size() != params.n) throw Error("labels do not match n");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < params.n; ++i) {
    const double ti = params.theta[i];
    const Eigen::Index ci = labels[i];
    for (std::size_t j = i + 1; j < params.n; ++j) {
      const double p = ti * params.theta[j] * params.P(ci, labels[j]);
      if (p > 1.0 + kProbabilityTol)
        throw Error("edge probability " + fmt_double(p) + " > 1 for pair (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      if (p <= 0.0) continue;
      if (unif(rng) < p) edges.emplace_back(i, j);
    }
  }
  Network net(params.n, std::move(edges));
  net.set_labels(labels);
  return net;
}

Eigen::MatrixXd sbm_weight_matrix(const std::vector<double>& a, double off_diag, double scale) {
  const auto K = static_cast<Eigen::Index>(a.size());
  if (off_diag < 0.0 || scale < 0.0 || std::any_of(a.begin(), a.end(), [](double v) { return v < 0.0; }))
    throw Error("weights must be nonnegative");
  Eigen::MatrixXd P = Eigen::MatrixXd::Constant(K, K, scale * off_diag);
  for (Eigen::Index k = 0; k < K; ++k) P(k, k) = scale * a[static_cast<std::size_t>(k)];
  if ((P.array() > 1.0).any()) throw Error("weight matrix entry exceeds 1");
  return P;
}

ThetaSource ThetaSource::parse(const std::string& spec) {
  ThetaSource src;
  const auto open = spec.find('(');
  const std::string name = spec.substr(0, open);
  std::vector<double> args;
  if (open != std::string::npos) {
    const auto close = spec.find(')', open);
    if (close == std::string::npos) throw Error("malformed theta source: " + spec);
    std::stringstream ss(spec.substr(open + 1, close - open - 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error("malformed theta source argument: " + spec);
      }
    }
  }
  if (name == "constant" && args.empty()) {
    src.kind = Kind::kConstant;
  } else if (name == "poisson" && args.size() == 1 && args[0] > 0.0) {
    src.kind = Kind::kPoissonPlusOne;
    src.mean = args[0];
  } else if (name == "pareto" && args.size() == 2 && args[0] > 0.0 && args[1] > 1.0) {
    src.kind = Kind::kTruncatedPareto;
    src.alpha = args[0];
    src.cap = args[1];
  } else {
    throw Error("unknown theta source: " + spec);
  }
  return src;
}

std::string ThetaSource::describe() const {
  switch (kind) {
    case Kind::kConstant: return "constant";
    case Kind::kPoissonPlusOne: return "poisson(" + fmt_double(mean) + ")";
    case Kind::kTruncatedPareto: return "pareto(" + fmt_double(alpha) + "," + fmt_double(cap) + ")";
    case Kind::kExplicit: return "explicit";
  }
  return "?";
}

std::vector<double> ThetaSource::draw(std::size_t n, Rng& rng) const {
  std::vector<double> out(n, 1.0);
  switch (kind) {
    case Kind::kConstant: break;
    case Kind::kPoissonPlusOne: {
      std::poisson_distribution<int> pois(mean);
      for (auto& v : out) v = static_cast<double>(pois(rng)) + 1.0;
      break;
    }
    case Kind::kTruncatedPareto: {
      // Inverse CDF of the Pareto(alpha, x_min = 1) law restricted to [1, cap].
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double tail = 1.0 - std::pow(cap, -alpha);
      for (auto& v : out) v = std::pow(1.0 - unif(rng) * tail, -1.0 / alpha);
      break;
    }
    case Kind::kExplicit:
      if (values.size() != n) throw Error("explicit theta list has wrong length");
      out = values;
      break;
  }
  return out;
}

DCSBMParams sbm_preset(const std::vector<double>& diagonal_weights, std::size_t n) {
  DCSBMParams params;
  params.n = n;
  params.K = 3;
  params.pi = {0.7, 0.2, 0.1};
  params.P = sbm_weight_matrix(diagonal_weights, 1.0, 0.01);
  params.theta.assign(n, 1.0);
  return params;
}

Eigen::MatrixXd dcsbm_time_preset_matrix() {
  Eigen::MatrixXd P(3, 3);
  P << 1.0, 0.04, 0.01,  //
      0.04, 1.2, 0.05,   //
      0.01, 0.05, 1.3;
  return P / 100.0;
}

}  // namespace fairspread
