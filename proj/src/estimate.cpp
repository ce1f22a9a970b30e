#include "fairspread/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "fairspread/error.hpp"

namespace fairspread {

namespace {

bool is_connected(const Network& net) {
  const std::size_t n = net.num_nodes();
  if (n == 0) return false;
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : net.neighbors(u))
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  return count == n;
}

}  // namespace

SpectralEmbedding score_embed(const Network& network, int K, double clip) {
  const std::size_t n = network.num_nodes();
  if (K < 1) throw Error("K must be positive");
  if (static_cast<std::size_t>(K) > n) throw Error("K exceeds node count");
  for (std::size_t i = 0; i < n; ++i)
    if (network.degree(i) == 0) throw Error("node " + std::to_string(i) + " has zero degree");
  if (!is_connected(network)) throw Error("network is disconnected; use its largest component");

  const Eigen::MatrixXd A = network.dense_adjacency();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd& vals = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(vals.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(vals(a)) > std::abs(vals(b)); });

  SpectralEmbedding emb;
  emb.clip = clip > 0.0 ? clip : std::log(static_cast<double>(n));
  emb.eigenvalues.resize(K);
  emb.eigenvectors.resize(static_cast<Eigen::Index>(n), K);
  const double lead = std::abs(vals(order[0]));
  for (int k = 0; k < K; ++k) {
    const Eigen::Index idx = order[static_cast<std::size_t>(k)];
    if (std::abs(vals(idx)) <= 1e-8 * lead)
      throw Error("K=" + std::to_string(K) + " exceeds the numerically distinguishable spectrum");
    emb.eigenvalues(k) = vals(idx);
    emb.eigenvectors.col(k) = solver.eigenvectors().col(idx);
    const double resid = (A * emb.eigenvectors.col(k) - vals(idx) * emb.eigenvectors.col(k)).norm();
    if (resid > 1e-6 * emb.eigenvectors.col(k).norm())
      throw Error("eigenpair residual too large: " + std::to_string(resid));
  }
  if (emb.eigenvectors.col(0).sum() < 0.0) emb.eigenvectors.col(0) *= -1.0;

  emb.ratios.resize(static_cast<Eigen::Index>(n), K - 1);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double denom = emb.eigenvectors(i, 0);
    if (denom == 0.0) throw Error("leading eigenvector vanishes at node " + std::to_string(i));
    for (int k = 1; k < K; ++k)
      emb.ratios(i, k - 1) = std::clamp(emb.eigenvectors(i, k) / denom, -emb.clip, emb.clip);
  }
  return emb;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int K, Rng& rng, int restarts, int max_iter) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (K < 1 || n < K) throw Error("k-means needs 1 <= K <= number of points");
  if (!points.allFinite()) throw Error("k-means input has non-finite entries");

  KMeansResult best;
  best.within_ss = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int completed = 0;
  for (int attempt = 0; completed < restarts && attempt < restarts * 10; ++attempt) {
    // k-means++ seeding.
    Eigen::MatrixXd centers(K, d);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = points.row(pick(rng));
    Eigen::VectorXd dist2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < K; ++c) {
      const double total = dist2.sum();
      Eigen::Index chosen = pick(rng);
      if (total > 0.0) {
        double target = unif(rng) * total;
        for (chosen = 0; chosen < n - 1; ++chosen) {
          target -= dist2(chosen);
          if (target <= 0.0) break;
        }
      }
      centers.row(c) = points.row(chosen);
      dist2 = dist2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    bool empty_cluster = false;
    for (int it = 0; it < max_iter; ++it) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg = 0;
        (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&arg);
        if (assign[static_cast<std::size_t>(i)] != static_cast<int>(arg)) {
          assign[static_cast<std::size_t>(i)] = static_cast<int>(arg);
          changed = true;
        }
      }
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
      std::vector<int> counts(static_cast<std::size_t>(K), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
      }
      empty_cluster = std::any_of(counts.begin(), counts.end(), [](int c) { return c == 0; });
      if (empty_cluster) break;
      for (int c = 0; c < K; ++c) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      if (!changed) break;
    }
    if (empty_cluster) continue;  // restart
    ++completed;

    double wss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      wss += (points.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    if (wss < best.within_ss) {
      best.within_ss = wss;
      best.assignment = assign;
      best.centers = centers;
    }
  }
  if (completed == 0) throw Error("k-means produced empty clusters on every restart");
  return best;
}

CommunityLabels relabel_by_size(const std::vector<int>& labels, int K) {
  std::vector<std::size_t> size(static_cast<std::size_t>(K), 0);
  std::vector<std::size_t> first(static_cast<std::size_t>(K), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    ++size.at(k);
    first[k] = std::min(first[k], i);
  }
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    return size[ua] != size[ub] ? size[ua] > size[ub] : first[ua] < first[ub];
  });
  std::vector<int> rank(static_cast<std::size_t>(K));
  for (int r = 0; r < K; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = rank[static_cast<std::size_t>(labels[i])];
  return CommunityLabels(std::move(out), K);
}

CommunityLabels cluster(const SpectralEmbedding& embedding, int K, Rng& rng) {
  const auto n = static_cast<std::size_t>(embedding.eigenvectors.rows());
  if (K == 1) return CommunityLabels(std::vector<int>(n, 0), 1);
  if (embedding.ratios.cols() != K - 1) throw Error("embedding dimension does not match K");
  const KMeansResult km = kmeans(embedding.ratios, K, rng, 20);
  return relabel_by_size(km.assignment, K);
}

EstimatedParams estimate_params(const Network& network, const CommunityLabels& labels) {
  const std::size_t n = network.num_nodes();
  if (labels.size() != n) throw Error("labels must cover all nodes");
  const int K = labels.num_communities();
  const auto& sizes = labels.community_sizes();
  for (int k = 0; k < K; ++k)
    if (sizes[static_cast<std::size_t>(k)] == 0) throw Error("community " + std::to_string(k) + " is empty");

  EstimatedParams est;
  est.labels = labels;
  DCSBMParams& p = est.params;
  p.n = n;
  p.K = K;
  p.pi.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    p.pi[static_cast<std::size_t>(k)] = static_cast<double>(sizes[static_cast<std::size_t>(k)]) / static_cast<double>(n);

  Eigen::MatrixXd edges = Eigen::MatrixXd::Zero(K, K);
  for (const auto& [u, v] : network.edges()) {
    edges(labels[u], labels[v]) += 1.0;
    if (labels[u] != labels[v]) edges(labels[v], labels[u]) += 1.0;
  }
  p.P.resize(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l) {
      const auto nk = static_cast<double>(sizes[static_cast<std::size_t>(k)]);
      const auto nl = static_cast<double>(sizes[static_cast<std::size_t>(l)]);
      const double pairs = k == l ? nk * (nk - 1.0) / 2.0 : nk * nl;
      if (pairs <= 0.0) {
        p.P(k, l) = 0.0;
        if (k <= l)
          est.warnings.push_back("block (" + std::to_string(k + 1) + "," + std::to_string(l + 1) +
                                 ") has no possible pairs; P-hat set to 0");
      } else {
        p.P(k, l) = edges(k, l) / pairs;
      }
    }

  // theta_i proportional to degree within its community, scaled so the
  // community mean is one.
  std::vector<double> degree_sum(static_cast<std::size_t>(K), 0.0);
  for (std::size_t i = 0; i < n; ++i) degree_sum[static_cast<std::size_t>(labels[i])] += static_cast<double>(network.degree(i));
  p.theta.resize(n);
  bool zero_degree = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    const double d = static_cast<double>(network.degree(i));
    zero_degree = zero_degree || d == 0.0;
    p.theta[i] = degree_sum[k] > 0.0 ? d * static_cast<double>(sizes[k]) / degree_sum[k] : 1.0;
  }
  if (zero_degree) {
    // Isolated nodes would get theta = 0, which the model forbids.
    throw Error("estimate_params needs every node to have positive degree (use the largest component)");
  }
  p.theta = normalize_theta(p.theta, labels, p.pi);
  return est;
}

Eigen::MatrixXi confusion_matrix(const CommunityLabels& truth, const CommunityLabels& estimate) {
  if (truth.size() != estimate.size()) throw Error("labelings differ in length");
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(truth.num_communities(), estimate.num_communities());
  for (std::size_t i = 0; i < truth.size(); ++i) ++table(truth[i], estimate[i]);
  return table;
}

std::vector<int> best_permutation(const CommunityLabels& truth, const CommunityLabels& estimate) {
  const int K = std::max(truth.num_communities(), estimate.num_communities());
  if (K > 8) throw Error("best permutation search limited to K <= 8");
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(K, K);
  table.topLeftCorner(truth.num_communities(), estimate.num_communities()) = confusion_matrix(truth, estimate);
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_hits = -1;
  do {
    long hits = 0;
    for (int e = 0; e < K; ++e) hits += table(perm[static_cast<std::size_t>(e)], e);
    if (hits > best_hits) {
      best_hits = hits;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double best_permutation_accuracy(const CommunityLabels& truth, const CommunityLabels& estimate) {
  const auto perm = best_permutation(truth, estimate);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (perm[static_cast<std::size_t>(estimate[i])] == truth[i]) ++hits;
  return truth.size() ? static_cast<double>(hits) / static_cast<double>(truth.size()) : 1.0;
}

}  // namespace fairspread
