#pragma once

// Ground-truth generators. The 2D toy draws class centers from a known
// population Gaussian and per-class samples around them; the synthetic
// teacher lifts an m-dimensional latent class structure into p dimensions
// through a smooth injective map, so reference capacities are known
// exactly while the learned pipeline only sees ambient vectors.

#include "repcap/capacity.hpp"
#include "repcap/embedding.hpp"
#include "repcap/projection.hpp"
#include "repcap/stats.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace repcap {

/// Zero-padded class label so lexicographic order equals numeric order.
std::string class_label(int index);

/// Draws from N(mean, cov) using a symmetric square root, so singular or zero
/// covariances are fine.
class GaussianSampler {
 public:
  GaussianSampler(Vector mean, const Matrix& cov);
  Vector operator()(std::mt19937_64& rng) const;
  const Matrix& root() const noexcept { return root_; }

 private:
  Vector mean_;
  Matrix root_;
};

Matrix symmetric_sqrt(const Matrix& cov);
Vector standard_normal(int dim, std::uint64_t seed);

// ---------------------------------------------------------------- toy

struct ToySpec {
  Matrix population_cov = (Matrix(2, 2) << 10.34, 0.71, 0.71, 11.79).finished();
  Matrix class_cov_template = (Matrix(2, 2) << 4.18, 0.97, 0.97, 5.86).finished();
  int n_classes = 100;
  int samples_per_class = 100;
  std::uint64_t seed = 0;
  // Each class covariance is the template scaled by u / max(u), u ~ U[lo, hi],
  // then rotated; the largest class keeps the template unrotated.
  double jitter_low = 0.5;
  double jitter_high = 1.5;

  void validate() const;
};

struct ToyData {
  EmbeddingSet samples;                     // labels class_label(c)
  std::vector<GaussianModel> classes;       // generative class models
  GaussianModel population{Vector::Zero(2), Matrix::Zero(2, 2)};
  int max_class = 0;                        // index of the largest class
};

ToyData generate_toy(const ToySpec& spec);

/// Monotone-chain hull + shoelace. Throws DegenerateHull for fewer than 3
/// points or a collinear set.
double convex_hull_area_2d(std::span<const Vector> points);
/// Hull vertices in counter-clockwise order.
std::vector<Vector> convex_hull_2d(std::span<const Vector> points);

struct ToyResult {
  double estimated_capacity = 0;
  double ground_truth_capacity = 0;
  double hull_capacity = 0;
  Matrix estimated_population_cov;  // scatter of fitted class means
  Matrix estimated_class_cov;       // fitted covariance of the largest class
  std::string estimated_class_id;
  double population_hull_area = 0;
  double class_hull_area = 0;
};

/// Capacity at r_y = r_z where the numerator is the population covariance
/// itself: sqrt(|population| / |class|).
double toy_ground_truth_capacity(const Matrix& population_cov, const Matrix& class_cov);

ToyResult toy_capacity_experiment(const ToySpec& spec);
ToyResult toy_capacity_experiment(const ToyData& data);

// ------------------------------------------------------- synthetic teacher

struct LiftSpec {
  bool identity = false;  // requires ambient_dim == latent_dim
  double offset = 10.0;   // radial offset along the extra frame direction
  double curvature = 0.4; // x = tanh(k a) / k elementwise
  bool normalize = true;  // project onto the unit sphere
};

struct SyntheticTeacherSpec {
  int latent_dim = 8;
  int ambient_dim = 64;
  int n_classes = 100;
  int samples_per_class = 50;
  Matrix between_class_cov;
  Matrix within_class_cov;
  // Class c gets within_class_cov * s_c, s_c ~ U[lo, hi].
  double within_scale_low = 1.0;
  double within_scale_high = 1.0;
  LiftSpec lift;
  std::uint64_t seed = 0;

  void validate() const;

  /// Rotated anisotropic between-class covariance with variances in [1, 4],
  /// within-class 0.04 I.
  static SyntheticTeacherSpec defaults(std::uint64_t seed = 0, int latent_dim = 8,
                                       int ambient_dim = 64);
  /// Between 4 I, within 0.04 I.
  static SyntheticTeacherSpec isotropic(std::uint64_t seed = 0, int latent_dim = 8,
                                        int ambient_dim = 64);
};

struct TeacherGroundTruth {
  Matrix between_class_cov;
  std::vector<std::string> class_ids;
  std::vector<Vector> centers;
  std::vector<Matrix> class_covs;
  Matrix latent;   // latent_dim x n, column per record
  Matrix frame;    // ambient_dim x (latent_dim + 1) orthonormal, empty for identity
};

struct SyntheticTeacher {
  EmbeddingSet embeddings;
  TeacherGroundTruth truth;
};

SyntheticTeacher generate_synthetic_teacher(const SyntheticTeacherSpec& spec);

/// Applies the lift to latent columns.
Matrix apply_lift(const LiftSpec& lift, const Matrix& frame, const Matrix& latent);

/// Capacity-engine on the true latent covariances; never touches data.
CapacityReport oracle_capacity(const TeacherGroundTruth& truth, const CapacityQuery& query);

/// Class statistics fitted from the latent samples (biased covariances).
std::vector<ClassStatistics> latent_class_statistics(const TeacherGroundTruth& truth,
                                                     std::span<const std::string> labels);

// -------------------------------------------------------------- verification

struct VerificationPairs {
  std::vector<IndexPair> genuine;
  std::vector<IndexPair> impostor;
};

/// `count` genuine and `count` impostor pairs. Throws InsufficientSamples
/// without two classes or without any class holding two records.
VerificationPairs sample_verification_pairs(std::span<const std::string> labels,
                                            std::size_t count, std::uint64_t seed);

/// Uniform random pairs of distinct indices.
std::vector<IndexPair> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed);

/// Squared Euclidean distance per pair.
std::vector<double> pair_distances(const Matrix& vectors, std::span<const IndexPair> pairs);

struct RocPoint {
  double far = 0;
  double tar = 0;
  double threshold = 0;
};

/// Accept when distance <= threshold; the threshold at FAR q is the
/// ceil(q N)-th smallest impostor distance.
std::vector<RocPoint> roc_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                 std::span<const double> far_grid);

std::vector<RocPoint> verification_eval(const EmbeddingSet& embeddings, std::size_t pair_count,
                                        std::span<const double> far_grid, std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace repcap
