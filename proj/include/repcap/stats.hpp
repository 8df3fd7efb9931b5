#pragma once

// Symmetric-PSD numerics shared by every stage: Gaussian fitting, Cholesky
// with a jitter ladder, Mahalanobis radii, the chi-squared law and
// hyper-ellipsoid volumes. All volume arithmetic stays in the log domain;
// at d >= 100 the raw volumes overflow a double.

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace repcap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Covariance support of a hyper-ellipsoid model.
enum class Parameterization {
  Isotropic,      // sigma^2 * I, sigma^2 = trace / d
  AxisAligned,    // diagonal only
  FullEllipsoid,  // unrestricted
};

std::string_view to_string(Parameterization p) noexcept;
/// Accepts the CLI spellings "sphere", "axis", "full".
Parameterization parse_parameterization(std::string_view text);

/// Projects a covariance onto the requested support.
Matrix reduce_covariance(const Matrix& cov, Parameterization p);

class GaussianModel {
 public:
  /// Validates symmetry (1e-12 relative), symmetrizes exactly and reduces to
  /// the requested parameterization. Does not jitter.
  GaussianModel(Vector mean, const Matrix& covariance,
                Parameterization p = Parameterization::FullEllipsoid);

  Eigen::Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  Parameterization parameterization() const noexcept { return param_; }

 private:
  Vector mean_;
  Matrix covariance_;
  Parameterization param_;
};

struct CholeskyFactor {
  Matrix lower;         // L with L * L^T = cov + jitter * I
  double log_det = 0;   // 2 * sum(log L_ii)
  double jitter = 0;    // absolute diagonal jitter that was applied
};

/// Relative jitter ladder, scaled by the mean diagonal (or 1 when that is 0).
inline constexpr double kJitterLadder[] = {1e-12, 1e-10, 1e-8, 1e-6};

/// Factorizes a symmetric PSD matrix. Retries with escalating diagonal
/// jitter; throws NotPositiveDefinite when the last rung still fails.
CholeskyFactor cholesky_logdet(const Matrix& cov);

/// Log-determinant of cov after reduction to p.
double log_det(const Matrix& cov, Parameterization p = Parameterization::FullEllipsoid);

/// Mean and biased (1/N) covariance, reduced to p and jittered to PD if needed.
GaussianModel estimate_gaussian(std::span<const Vector> samples,
                                Parameterization p = Parameterization::FullEllipsoid);

/// (x - mu)^T Sigma^{-1} (x - mu) via a triangular solve.
double mahalanobis_sq(const Vector& x, const GaussianModel& g);
double mahalanobis_sq(const Vector& x, const Vector& mean, const CholeskyFactor& factor);

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi2_cdf(double r2, int d);
/// Survival function 1 - chi2_cdf, accurate in the upper tail.
double chi2_sf(double r2, int d);
double chi2_pdf(double r2, int d);

/// r2 with chi2_cdf(r2, d) = p, for p in (0, 1).
double chi2_inverse_cdf(double p, int d);
/// r2 with chi2_sf(r2, d) = q, for q in (0, 1). Keeps precision for tiny q.
double chi2_inverse_sf(double q, int d);

/// log of the volume of the unit d-ball.
double unit_ball_log_volume(int d);

/// log(V_d * |Sigma|^{1/2} * r^d).
double ellipsoid_log_volume(const GaussianModel& g, double r);

}  // namespace repcap
