#pragma once

// Community detection by spectral clustering on eigenvector ratios (SCORE)
// and plug-in DCSBM parameter estimates from an observed network.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairspread/model.hpp"
#include "fairspread/rng.hpp"

namespace fairspread {

struct SpectralEmbedding {
  Eigen::VectorXd eigenvalues;   // leading K by magnitude, in decreasing |value|
  Eigen::MatrixXd eigenvectors;  // n x K, first column positive
  Eigen::MatrixXd ratios;        // n x (K-1), v_{k+1}(i) / v_1(i) clipped
  double clip = 0.0;
};

/// Leading eigenvectors of the adjacency and their ratios to the first one,
/// clipped to [-clip, clip]; clip <= 0 selects log(n).
/// Rejects disconnected input, isolated nodes and K beyond the resolvable spectrum.
SpectralEmbedding score_embed(const Network& network, int K, double clip = 0.0);

struct KMeansResult {
  std::vector<int> assignment;
  Eigen::MatrixXd centers;
  double within_ss = 0.0;
};

/// Lloyd iterations from k-means++ seeding, best of `restarts`.
KMeansResult kmeans(const Eigen::MatrixXd& points, int K, Rng& rng, int restarts = 20, int max_iter = 300);

/// k-means on the ratio rows; labels renumbered by decreasing community size.
CommunityLabels cluster(const SpectralEmbedding& embedding, int K, Rng& rng);

/// Renumbers labels so community 0 is the largest (ties: lowest first node).
CommunityLabels relabel_by_size(const std::vector<int>& labels, int K);

struct EstimatedParams {
  CommunityLabels labels;
  DCSBMParams params;  // pi-hat, P-hat, theta-hat (identifiability-normalized)
  std::vector<std::string> warnings;
};

EstimatedParams estimate_params(const Network& network, const CommunityLabels& labels);

/// Fraction of nodes on which two labelings agree under the best matching of
/// communities (exhaustive over permutations; K <= 8).
double best_permutation_accuracy(const CommunityLabels& truth, const CommunityLabels& estimate);

/// Best matching used by best_permutation_accuracy: perm[k_est] = k_truth.
std::vector<int> best_permutation(const CommunityLabels& truth, const CommunityLabels& estimate);

/// K_true x K_est contingency table.
Eigen::MatrixXi confusion_matrix(const CommunityLabels& truth, const CommunityLabels& estimate);

}  // namespace fairspread
