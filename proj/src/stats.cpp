#include "repcap/stats.hpp"

#include "repcap/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

namespace repcap {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::InvalidTargetDim: return "InvalidTargetDim";
    case ErrorCode::NoUsableClasses: return "NoUsableClasses";
    case ErrorCode::InsufficientClasses: return "InsufficientClasses";
    case ErrorCode::DegenerateHull: return "DegenerateHull";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

bool is_numeric_failure(ErrorCode code) noexcept {
  return code == ErrorCode::NotPositiveDefinite || code == ErrorCode::DegenerateVector ||
         code == ErrorCode::DegenerateHull;
}

std::string_view to_string(Parameterization p) noexcept {
  switch (p) {
    case Parameterization::Isotropic: return "sphere";
    case Parameterization::AxisAligned: return "axis";
    case Parameterization::FullEllipsoid: return "full";
  }
  return "full";
}

Parameterization parse_parameterization(std::string_view text) {
  if (text == "sphere" || text == "isotropic") return Parameterization::Isotropic;
  if (text == "axis" || text == "diagonal") return Parameterization::AxisAligned;
  if (text == "full") return Parameterization::FullEllipsoid;
  throw Error(ErrorCode::InvalidArgument, "unknown parameterization '" + std::string(text) + "'");
}

Matrix reduce_covariance(const Matrix& cov, Parameterization p) {
  switch (p) {
    case Parameterization::Isotropic: {
      const double s2 = cov.trace() / static_cast<double>(cov.rows());
      return s2 * Matrix::Identity(cov.rows(), cov.cols());
    }
    case Parameterization::AxisAligned:
      return Matrix(cov.diagonal().asDiagonal());
    case Parameterization::FullEllipsoid:
      return cov;
  }
  return cov;
}

namespace {

void require_square_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance is " + std::to_string(m.rows()) +
                                                  "x" + std::to_string(m.cols()));
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "covariance is not symmetric");
  }
}

double jitter_scale(const Matrix& m) {
  const double mean_diag = m.diagonal().mean();
  return mean_diag > 0 ? mean_diag : 1.0;
}

}  // namespace

GaussianModel::GaussianModel(Vector mean, const Matrix& covariance, Parameterization p)
    : mean_(std::move(mean)), param_(p) {
  require_square_symmetric(covariance);
  if (covariance.rows() != mean_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mean has length " + std::to_string(mean_.size()) +
                                                  ", covariance is " +
                                                  std::to_string(covariance.rows()) + "-dim");
  }
  const Matrix sym = 0.5 * (covariance + covariance.transpose());
  covariance_ = reduce_covariance(sym, p);
}

CholeskyFactor cholesky_logdet(const Matrix& cov) {
  require_square_symmetric(cov);
  const Eigen::Index d = cov.rows();
  const double scale = jitter_scale(cov);

  auto attempt = [&](double jitter) -> std::optional<CholeskyFactor> {
    Matrix shifted = cov;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) return std::nullopt;
    CholeskyFactor f;
    f.lower = llt.matrixL();
    if ((f.lower.diagonal().array() <= 0.0).any()) return std::nullopt;
    f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
    f.jitter = jitter;
    return f;
  };

  if (auto f = attempt(0.0)) return *f;
  for (double rung : kJitterLadder) {
    if (auto f = attempt(rung * scale)) return *f;
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "factorization of " + std::to_string(d) + "-dim covariance failed after jitter " +
                  std::to_string(kJitterLadder[std::size(kJitterLadder) - 1] * scale));
}

double log_det(const Matrix& cov, Parameterization p) {
  return cholesky_logdet(reduce_covariance(cov, p)).log_det;
}

GaussianModel estimate_gaussian(std::span<const Vector> samples, Parameterization p) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                "need at least 2 samples, got " + std::to_string(samples.size()));
  }
  const Eigen::Index d = samples.front().size();
  Vector mean = Vector::Zero(d);
  for (const auto& s : samples) {
    if (s.size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "sample of length " + std::to_string(s.size()) +
                                                    ", expected " + std::to_string(d));
    }
    mean += s;
  }
  const double n = static_cast<double>(samples.size());
  mean /= n;

  Matrix cov = Matrix::Zero(d, d);
  for (const auto& s : samples) {
    const Vector c = s - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= n;
  cov = reduce_covariance(cov, p);

  const CholeskyFactor f = cholesky_logdet(cov);
  if (f.jitter > 0) cov.diagonal().array() += f.jitter;
  return GaussianModel(std::move(mean), cov, p);
}

double mahalanobis_sq(const Vector& x, const Vector& mean, const CholeskyFactor& factor) {
  if (x.size() != mean.size() || factor.lower.rows() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "point has length " + std::to_string(x.size()) +
                                                  ", model is " + std::to_string(mean.size()) +
                                                  "-dim");
  }
  const Vector w = factor.lower.triangularView<Eigen::Lower>().solve(x - mean);
  return w.squaredNorm();
}

double mahalanobis_sq(const Vector& x, const GaussianModel& g) {
  if (x.size() != g.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "point has length " + std::to_string(x.size()) +
                                                  ", model is " + std::to_string(g.dim()) +
                                                  "-dim");
  }
  return mahalanobis_sq(x, g.mean(), cholesky_logdet(g.covariance()));
}

namespace {

constexpr double kGammaEps = 1e-16;
constexpr int kGammaMaxIter = 100000;

// log(x^a e^-x / Gamma(a))
double gamma_log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

// P(a, x) by its power series; converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(gamma_log_prefactor(a, x));
}

// Q(a, x) by modified Lentz on the Legendre continued fraction; x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(gamma_log_prefactor(a, x)) * h;
}

void require_gamma_args(double a, double x) {
  if (!(a > 0) || !(x >= 0)) {
    throw Error(ErrorCode::InvalidArgument, "incomplete gamma needs a > 0 and x >= 0");
  }
}

}  // namespace

double gamma_p(double a, double x) {
  require_gamma_args(a, x);
  if (x == 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  require_gamma_args(a, x);
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

namespace {

void require_dof(int d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be >= 1");
}

}  // namespace

double chi2_cdf(double r2, int d) {
  require_dof(d);
  if (!(r2 >= 0)) throw Error(ErrorCode::InvalidArgument, "chi2_cdf needs r2 >= 0");
  return gamma_p(0.5 * d, 0.5 * r2);
}

double chi2_sf(double r2, int d) {
  require_dof(d);
  if (!(r2 >= 0)) throw Error(ErrorCode::InvalidArgument, "chi2_sf needs r2 >= 0");
  return gamma_q(0.5 * d, 0.5 * r2);
}

double chi2_pdf(double r2, int d) {
  require_dof(d);
  const double a = 0.5 * d;
  if (r2 <= 0) {
    if (d == 1) return std::numeric_limits<double>::infinity();
    return d == 2 ? 0.5 : 0.0;
  }
  return std::exp((a - 1.0) * std::log(r2) - 0.5 * r2 - a * std::numbers::ln2 - std::lgamma(a));
}

namespace {

// Solves for r2 where the increasing function g(r2) = cdf(r2) - p (lower
// tail) or q - sf(r2) (upper tail) crosses zero. Newton inside a maintained
// bracket, bisection whenever the Newton step leaves it.
double chi2_solve(double target, int d, bool upper) {
  auto g = [&](double x) { return upper ? target - chi2_sf(x, d) : chi2_cdf(x, d) - target; };

  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(d));
  while (g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw Error(ErrorCode::InvalidProbability, "chi2 quantile overflow");
  }

  double x = std::clamp(static_cast<double>(d), lo, hi);
  if (x <= lo || x >= hi) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 1000; ++iter) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0) lo = x; else hi = x;

    const double slope = chi2_pdf(x, d);
    double next = (slope > 0 && std::isfinite(slope)) ? x - gx / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::abs(next) || hi - lo <= 1e-15 * hi) return next;
    x = next;
  }
  return x;
}

void require_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidProbability,
                std::string(what) + " must lie in (0, 1), got " + std::to_string(p));
  }
}

}  // namespace

double chi2_inverse_cdf(double p, int d) {
  require_dof(d);
  require_open_unit(p, "probability");
  if (p > 0.5) return chi2_solve(1.0 - p, d, /*upper=*/true);
  return chi2_solve(p, d, /*upper=*/false);
}

double chi2_inverse_sf(double q, int d) {
  require_dof(d);
  require_open_unit(q, "tail probability");
  if (q < 0.5) return chi2_solve(q, d, /*upper=*/true);
  return chi2_solve(1.0 - q, d, /*upper=*/false);
}

double unit_ball_log_volume(int d) {
  require_dof(d);
  const double half = 0.5 * d;
  return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

double ellipsoid_log_volume(const GaussianModel& g, double r) {
  if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  const int d = static_cast<int>(g.dim());
  const double ld = cholesky_logdet(g.covariance()).log_det;
  return unit_ball_log_volume(d) + 0.5 * ld + d * std::log(r);
}

}  // namespace repcap
