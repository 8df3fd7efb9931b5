#pragma once

// Manifold unfolding: a network trained so that Euclidean distances between
// projected points reproduce cosine-derived distances between the inputs,
// plus a linear PCA projector as the classical baseline.

#include "repcap/embedding.hpp"
#include "repcap/mlp.hpp"
#include "repcap/optim.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace repcap {

enum class DistanceConvention {
  OneMinusCos,  // 1 - cos
  OnePlusCos,   // 1 + cos, the sign as printed in the original formulation
  Chordal,      // |x/|x| - y/|y||, i.e. sqrt(2 (1 - cos))
};

std::string_view to_string(DistanceConvention c) noexcept;
DistanceConvention parse_distance(std::string_view text);

double high_dim_distance(const Vector& a, const Vector& b,
                         DistanceConvention c = DistanceConvention::Chordal);

using IndexPair = std::pair<Eigen::Index, Eigen::Index>;

/// Pairs over the columns of `inputs` with their target distances.
struct PairBatch {
  Matrix inputs;
  std::vector<IndexPair> pairs;
  Vector targets;
};

PairBatch make_pair_batch(const Matrix& inputs, std::vector<IndexPair> pairs,
                          DistanceConvention c);

/// sum_k (target_k - |f(a_k) - f(b_k)|)^2 + lambda |theta|^2, dropout off.
double mds_loss(const PairBatch& batch, const MlpNetwork& net, double lambda);
double mds_loss(std::span<const std::pair<Vector, Vector>> pairs, const MlpNetwork& net,
                double lambda, DistanceConvention c = DistanceConvention::Chordal);

/// Loss and its exact gradient with respect to every parameter.
double mds_loss_gradient(const PairBatch& batch, const MlpNetwork& net, double lambda,
                         MlpGradient& grad);

struct ProjectorConfig {
  TrainConfig train;
  int width = 512;
  int residual_blocks = 2;
  DistanceConvention distance = DistanceConvention::Chordal;
  double validation_fraction = 0.1;
};

/// input -> width (leaky) -> residual blocks of `width` -> out_dim (linear).
MlpNetwork make_projector(int input_dim, int out_dim, int width, int residual_blocks,
                          std::uint64_t seed);

struct ProjectorTraining {
  MlpNetwork net;
  /// Mean per-pair validation loss; entry 0 is the initialization.
  std::vector<double> validation_loss;
};

/// Trains on uniformly sampled pairs. Epochs pair consecutive entries of a
/// fresh seeded permutation of the training records; a seeded 10% of the
/// records is held out for validation pairs.
ProjectorTraining train_projection(const EmbeddingSet& data, int out_dim,
                                   const ProjectorConfig& cfg);

Vector project(const MlpNetwork& net, const Vector& x);
Matrix project(const MlpNetwork& net, const Matrix& batch);

/// Linear baseline: y = V^T (x - mean), V the top-m covariance eigenvectors.
struct LinearProjector {
  Matrix components;  // dim x m, orthonormal columns
  Vector mean;
  Vector variances;   // descending

  int input_dim() const { return static_cast<int>(components.rows()); }
  int output_dim() const { return static_cast<int>(components.cols()); }
  Vector project(const Vector& x) const;
  Matrix project(const Matrix& batch) const;
};

LinearProjector fit_pca(const EmbeddingSet& data, int m);

}  // namespace repcap
