#include "repcap/stats.hpp"

#include "test_util.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <numbers>

using namespace repcap;
using repcap::test::rel_err;

namespace {

const Matrix kPopulation = (Matrix(2, 2) << 10.34, 0.71, 0.71, 11.79).finished();

std::vector<Vector> points(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<Vector> out;
  for (auto [x, y] : xy) out.push_back((Vector(2) << x, y).finished());
  return out;
}

}  // namespace

TEST_CASE("estimate_gaussian on the four-point square") {
  const auto s = points({{0, 0}, {2, 0}, {0, 2}, {2, 2}});
  const GaussianModel g = estimate_gaussian(s);
  CHECK(g.mean().isApprox(Vector::Ones(2)));
  CHECK((g.covariance() - Matrix::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("identical samples are jittered to a small multiple of the identity") {
  const auto s = points({{1, 1}, {1, 1}, {1, 1}});
  for (auto p : {Parameterization::Isotropic, Parameterization::AxisAligned,
                 Parameterization::FullEllipsoid}) {
    const GaussianModel g = estimate_gaussian(s, p);
    const Matrix& c = g.covariance();
    CHECK(c(0, 1) == 0.0);
    CHECK(c(0, 0) > 0.0);
    CHECK(c(0, 0) <= 1e-6);
    CHECK(c(0, 0) == c(1, 1));
  }
}

TEST_CASE("estimate_gaussian recovers a known covariance from 1e4 draws") {
  std::mt19937_64 rng(11);
  const Eigen::LLT<Matrix> llt(kPopulation);
  std::vector<Vector> s;
  for (int i = 0; i < 10000; ++i) s.push_back(llt.matrixL() * test::random_matrix(rng, 2, 1));
  const GaussianModel g = estimate_gaussian(s);
  for (int i = 0; i < 2; ++i) CHECK(rel_err(g.covariance()(i, i), kPopulation(i, i)) < 0.05);
  // The off-diagonal is small relative to the scale; compare on that scale.
  CHECK(std::abs(g.covariance()(0, 1) - 0.71) < 0.05 * std::sqrt(10.34 * 11.79));
}

TEST_CASE("estimate_gaussian errors") {
  CHECK_THROWS_CODE(estimate_gaussian(points({{1, 2}})), ErrorCode::InsufficientSamples);
  std::vector<Vector> mixed = points({{1, 2}, {3, 4}});
  mixed.push_back(Vector::Zero(3));
  CHECK_THROWS_CODE(estimate_gaussian(mixed), ErrorCode::DimensionMismatch);
}

TEST_CASE("axis-aligned fit equals the full fit with off-diagonals zeroed") {
  std::mt19937_64 rng(3);
  std::vector<Vector> s;
  const Matrix mix = test::random_matrix(rng, 4, 4);
  for (int i = 0; i < 200; ++i) s.push_back(mix * test::random_matrix(rng, 4, 1));
  const Matrix full = estimate_gaussian(s, Parameterization::FullEllipsoid).covariance();
  const Matrix axis = estimate_gaussian(s, Parameterization::AxisAligned).covariance();
  const Matrix iso = estimate_gaussian(s, Parameterization::Isotropic).covariance();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(axis(i, j) == (i == j ? full(i, j) : 0.0));
  }
  CHECK(iso.isApprox(full.trace() / 4 * Matrix::Identity(4, 4), 1e-14));
}

TEST_CASE("cholesky_logdet examples") {
  CHECK(cholesky_logdet(Matrix::Identity(3, 3)).log_det == doctest::Approx(0.0));
  const Matrix d = Vector((Vector(2) << 4, 9).finished()).asDiagonal();
  CHECK(cholesky_logdet(d).log_det == doctest::Approx(std::log(36.0)).epsilon(1e-14));
  const double det = 10.34 * 11.79 - 0.71 * 0.71;
  CHECK(cholesky_logdet(kPopulation).log_det == doctest::Approx(std::log(det)).epsilon(1e-14));
  CHECK(std::log(det) == doctest::Approx(std::log(121.40)).epsilon(1e-4));
}

TEST_CASE("cholesky factor reconstructs the input") {
  std::mt19937_64 rng(5);
  for (int d : {1, 3, 10, 64}) {
    const Matrix c = test::random_spd(rng, d);
    const CholeskyFactor f = cholesky_logdet(c);
    CHECK(f.jitter == 0.0);
    CHECK((f.lower * f.lower.transpose() - c).norm() / c.norm() < 1e-8);
  }
}

TEST_CASE("cholesky jitter ladder rescues singular PSD matrices and rejects indefinite ones") {
  Matrix rank1 = Matrix::Ones(3, 3);
  const CholeskyFactor f = cholesky_logdet(rank1);
  CHECK(f.jitter > 0.0);
  CHECK(f.jitter <= 1e-6 * 1.0 + 1e-300);
  Matrix indefinite = Matrix::Identity(2, 2);
  indefinite(1, 1) = -1;
  CHECK_THROWS_CODE(cholesky_logdet(indefinite), ErrorCode::NotPositiveDefinite);
}

TEST_CASE("mahalanobis_sq examples") {
  const Vector mu = (Vector(3) << 1, -2, 0.5).finished();
  const GaussianModel unit(mu, Matrix::Identity(3, 3));
  CHECK(mahalanobis_sq(mu, unit) == 0.0);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Vector x = test::random_matrix(rng, 3, 1, 3.0);
    CHECK(mahalanobis_sq(x, unit) == doctest::Approx((x - mu).squaredNorm()).epsilon(1e-15));
  }
  const GaussianModel g(Vector::Zero(2), Vector((Vector(2) << 4, 1).finished()).asDiagonal());
  CHECK(mahalanobis_sq((Vector(2) << 2, 0).finished(), g) == doctest::Approx(1.0));
}

TEST_CASE("gamma_p agrees with Boost across regimes") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> la(-3, 6), lx(-4, 6);
  for (int i = 0; i < 2000; ++i) {
    const double a = std::pow(10.0, la(rng) / 2);
    const double x = std::pow(10.0, lx(rng) / 2) * a;
    const double want = boost::math::gamma_p(a, x);
    const double wantq = boost::math::gamma_q(a, x);
    CHECK(std::abs(gamma_p(a, x) - want) <= 1e-12 + 1e-10 * want);
    CHECK(std::abs(gamma_q(a, x) - wantq) <= 1e-12 + 1e-10 * wantq);
  }
}

TEST_CASE("chi2_cdf closed forms") {
  for (int d : {1, 2, 5, 100}) CHECK(chi2_cdf(0.0, d) == 0.0);
  for (double x : {0.01, 0.5, 1.0, 3.0, 9.2103403719761836, 40.0}) {
    CHECK(chi2_cdf(x, 2) == doctest::Approx(1 - std::exp(-x / 2)).epsilon(1e-13));
    CHECK(chi2_cdf(x, 4) == doctest::Approx(1 - std::exp(-x / 2) * (1 + x / 2)).epsilon(1e-12));
  }
  CHECK(chi2_cdf(-2 * std::log(0.01), 2) == doctest::Approx(0.99).epsilon(1e-14));
}

TEST_CASE("chi2_cdf is monotone and tends to one") {
  for (int d : {1, 3, 8, 64, 512}) {
    double prev = -1;
    for (double x = 0; x < 4.0 * d + 200; x += 0.25 + d / 50.0) {
      const double p = chi2_cdf(x, d);
      CHECK(p >= prev);
      prev = p;
    }
    CHECK(chi2_cdf(20.0 * d + 1000, d) == doctest::Approx(1.0));
  }
}

TEST_CASE("chi2 inverse closed forms and Boost quantiles") {
  CHECK(std::abs(chi2_inverse_cdf(0.99, 2) - 9.21034037197618) < 1e-10);
  for (double q : {1e-9, 1e-6, 1e-3, 0.01, 0.3, 0.7, 0.99}) {
    CHECK(std::abs(chi2_inverse_cdf(q, 2) + 2 * std::log1p(-q)) <= 1e-8);
    CHECK(std::abs(chi2_inverse_sf(q, 2) + 2 * std::log(q)) <= 1e-8);
  }
  for (int d : {1, 2, 3, 8, 64, 500}) {
    const boost::math::chi_squared_distribution<double> law(d);
    for (double p : {1e-6, 0.01, 0.5, 0.95, 0.999999}) {
      const double want = boost::math::quantile(law, p);
      CHECK(std::abs(chi2_inverse_cdf(p, d) - want) <= 1e-9 * std::max(1.0, want));
    }
  }
  CHECK(chi2_inverse_cdf(1e-300, 3) < 1e-150);
}

TEST_CASE("chi2 inverse Erlang check at d = 4") {
  // Solve 1 - e^{-x/2}(1 + x/2) = p by bisection as an independent oracle.
  for (double p : {0.001, 0.1, 0.5, 0.9, 0.99, 0.9999}) {
    double lo = 0, hi = 200;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (1 - std::exp(-mid / 2) * (1 + mid / 2) < p ? lo : hi) = mid;
    }
    CHECK(std::abs(chi2_inverse_cdf(p, 4) - 0.5 * (lo + hi)) <= 1e-8);
  }
}

TEST_CASE("chi2 round trip on random (p, d)") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dd(1, 512);
  std::uniform_real_distribution<double> pp(1e-6, 1 - 1e-6);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const int d = dd(rng);
    const double p = pp(rng);
    worst = std::max(worst, std::abs(chi2_cdf(chi2_inverse_cdf(p, d), d) - p));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("chi2 inverse is monotone in p and validates probabilities") {
  for (int d : {1, 7, 300}) {
    double prev = 0;
    for (double p = 0.001; p < 1; p += 0.0123) {
      const double r2 = chi2_inverse_cdf(p, d);
      CHECK(r2 > prev);
      prev = r2;
    }
  }
  for (double bad : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    CHECK_THROWS_CODE(chi2_inverse_cdf(bad, 3), ErrorCode::InvalidProbability);
    CHECK_THROWS_CODE(chi2_inverse_sf(bad, 3), ErrorCode::InvalidProbability);
  }
}

TEST_CASE("ellipsoid_log_volume examples") {
  const GaussianModel unit(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(ellipsoid_log_volume(unit, 1.0) == doctest::Approx(std::log(std::numbers::pi)));
  const GaussianModel pop(Vector::Zero(2), kPopulation);
  CHECK(std::abs(ellipsoid_log_volume(pop, 1.0) - std::log(34.62)) < 1e-3);

  std::mt19937_64 rng(29);
  const Matrix c = test::random_spd(rng, 5);
  const double base = ellipsoid_log_volume(GaussianModel(Vector::Zero(5), c), 1.7);
  const double s = 2.5;
  CHECK(ellipsoid_log_volume(GaussianModel(Vector::Zero(5), s * s * c), 1.7) ==
        doctest::Approx(base + 5 * std::log(s)).epsilon(1e-13));
  for (int i = 0; i < 10; ++i) {
    const Matrix r = test::random_rotation(rng, 5);
    const Matrix rc = r * c * r.transpose();
    const GaussianModel rotated(Vector::Zero(5), 0.5 * (rc + rc.transpose()));
    CHECK(ellipsoid_log_volume(rotated, 1.7) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("unit-disk area matches a Monte-Carlo estimate") {
  // Rejection sampling of an anisotropic ellipse inside its bounding box.
  const Matrix c = (Matrix(2, 2) << 2.0, 0.6, 0.6, 1.0).finished();
  const GaussianModel g(Vector::Zero(2), c);
  const double r = 1.3;
  const double half_w = r * std::sqrt(c(0, 0)), half_h = r * std::sqrt(c(1, 1));
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(-half_w, half_w), uy(-half_h, half_h);
  const int n = 400000;
  int inside = 0;
  for (int i = 0; i < n; ++i) {
    const Vector x = (Vector(2) << ux(rng), uy(rng)).finished();
    if (mahalanobis_sq(x, g) <= r * r) ++inside;
  }
  const double area = 4 * half_w * half_h * inside / n;
  CHECK(rel_err(area, std::exp(ellipsoid_log_volume(g, r))) < 0.01);
}

TEST_CASE("reduce_covariance and parameterization names") {
  const Matrix c = (Matrix(2, 2) << 3, 1, 1, 5).finished();
  CHECK(reduce_covariance(c, Parameterization::Isotropic).isApprox(4 * Matrix::Identity(2, 2)));
  CHECK(reduce_covariance(c, Parameterization::AxisAligned)(0, 1) == 0.0);
  for (auto p : {Parameterization::Isotropic, Parameterization::AxisAligned,
                 Parameterization::FullEllipsoid}) {
    CHECK(parse_parameterization(to_string(p)) == p);
  }
  CHECK_THROWS_CODE(parse_parameterization("cube"), ErrorCode::InvalidArgument);
}

TEST_CASE("GaussianModel rejects asymmetric covariances") {
  Matrix c = Matrix::Identity(2, 2);
  c(0, 1) = 0.5;
  CHECK_THROWS(GaussianModel(Vector::Zero(2), c));
}
