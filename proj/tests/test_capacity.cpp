#include "repcap/capacity.hpp"

#include "test_util.hpp"

#include <limits>

using namespace repcap;
using repcap::test::rel_err;

namespace {

UncertaintyEstimate estimate(const Vector& mu, const Matrix& sigma) {
  UncertaintyEstimate e;
  e.mu_hat = mu;
  e.sigma_hat = sigma;
  e.epistemic = Matrix::Zero(mu.size(), mu.size());
  e.aleatoric = sigma;
  e.passes = 1;
  return e;
}

Matrix diag2(double a, double b) { return Vector((Vector(2) << a, b).finished()).asDiagonal(); }
Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

// Random class set with distinct covariance volumes.
std::vector<ClassStatistics> random_classes(std::mt19937_64& rng, int n, int d) {
  std::vector<ClassStatistics> out;
  for (int c = 0; c < n; ++c) {
    const double s = 0.2 + 0.1 * c;
    out.push_back(make_class_statistics("k" + std::to_string(100 + c), 10,
                                        test::random_matrix(rng, d, 1, 3.0),
                                        s * test::random_spd(rng, d)));
  }
  return out;
}

ClassStatistics with_logdet(const std::string& id, double log_det) {
  // 1-dim class with the requested log-determinant.
  return make_class_statistics(id, 5, Vector::Zero(1), Matrix::Constant(1, 1, std::exp(log_det)));
}

}  // namespace

TEST_CASE("class_statistics averages member uncertainty") {
  const std::vector<std::string> one{"a"};
  const std::vector<UncertaintyEstimate> single{estimate(vec2(1, 2), Matrix::Identity(2, 2))};
  for (auto mode : {ClassCovariance::Uncertainty, ClassCovariance::WithMemberScatter}) {
    const auto r = class_statistics(one, single, 1, mode);
    CHECK(r.classes.size() == 1);
    CHECK(r.classes[0].sigma_z == Matrix::Identity(2, 2));
    CHECK(r.classes[0].mu_c == vec2(1, 2));
  }

  const std::vector<std::string> two{"a", "a"};
  const std::vector<UncertaintyEstimate> pair{estimate(vec2(0, 0), diag2(1, 3)),
                                              estimate(vec2(2, 0), diag2(3, 1))};
  const auto plain = class_statistics(two, pair, 1, ClassCovariance::Uncertainty);
  CHECK(plain.classes[0].sigma_z == diag2(2, 2));
  CHECK(plain.classes[0].log_det_z == doctest::Approx(std::log(4.0)));
  // The member means sit at +-(1, 0) around the class mean.
  const auto scattered = class_statistics(two, pair, 1, ClassCovariance::WithMemberScatter);
  CHECK(scattered.classes[0].sigma_z.isApprox(diag2(3, 2)));
}

TEST_CASE("class_statistics filters small classes") {
  const std::vector<std::string> labels{"b", "a", "b", "c", "b", "a"};
  std::vector<UncertaintyEstimate> est;
  for (int i = 0; i < 6; ++i) est.push_back(estimate(vec2(i, -i), Matrix::Identity(2, 2)));
  const auto r = class_statistics(labels, est, 2);
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].class_id == "a");
  CHECK(r.classes[1].class_id == "b");
  CHECK(r.classes[1].n_samples == 3);
  CHECK(r.dropped == std::vector<std::string>{"c"});
  CHECK_THROWS_CODE(class_statistics(labels, est, 4), ErrorCode::NoUsableClasses);
  CHECK_THROWS_CODE(class_statistics(std::vector<std::string>{"a"}, est, 1),
                    ErrorCode::DimensionMismatch);
}

TEST_CASE("population_statistics examples") {
  std::vector<ClassStatistics> same{make_class_statistics("a", 5, vec2(1, 1), diag2(2, 3)),
                                    make_class_statistics("b", 5, vec2(1, 1), diag2(1, 1))};
  const auto p = population_statistics(same, same[0]);
  CHECK(p.scatter_b.isZero(0.0));
  CHECK(p.enclosing == diag2(2, 3));
  CHECK(p.n_classes == 2);

  std::vector<ClassStatistics> pm{make_class_statistics("a", 5, vec2(1, 0), diag2(1e-3, 1e-3)),
                                  make_class_statistics("b", 5, vec2(-1, 0), diag2(1e-3, 1e-3))};
  const auto q = population_statistics(pm, pm[0]);
  CHECK(q.scatter_b == diag2(1, 0));
  CHECK(q.mu_y.isZero(0.0));
  CHECK((q.sigma_y + pm[0].sigma_z - q.enclosing).isZero(1e-15));
  CHECK_THROWS_CODE(population_statistics(std::span(pm).first(1), pm[0]),
                    ErrorCode::InsufficientClasses);
}

TEST_CASE("between-class scatter matches the recentering identity") {
  std::mt19937_64 rng(3);
  std::vector<Vector> means;
  for (int c = 0; c < 40; ++c) means.push_back(test::random_matrix(rng, 5, 1, 2.0));
  Vector mu = Vector::Zero(5);
  Matrix raw = Matrix::Zero(5, 5);
  for (const auto& v : means) {
    mu += v;
    raw += v * v.transpose();
  }
  mu /= 40;
  const Matrix alt = (raw - 40 * mu * mu.transpose()) / 40;
  CHECK((between_class_scatter(means) - alt).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("canonical class selection") {
  const std::vector<ClassStatistics> one{with_logdet("x", 3)};
  for (auto s : {Selector::Min, Selector::Mean, Selector::Median, Selector::Max}) {
    CHECK(select_canonical_class(one, s).class_id == "x");
  }
  const std::vector<ClassStatistics> three{with_logdet("c9", 9), with_logdet("c1", 1),
                                           with_logdet("c2", 2)};
  CHECK(select_canonical_class(three, Selector::Min).class_id == "c1");
  CHECK(select_canonical_class(three, Selector::Median).class_id == "c2");
  CHECK(select_canonical_class(three, Selector::Mean).class_id == "c2");
  CHECK(select_canonical_class(three, Selector::Max).class_id == "c9");

  // Even count takes the lower middle; ties go to the smallest id.
  const std::vector<ClassStatistics> four{with_logdet("d", 4), with_logdet("b", 1),
                                          with_logdet("c", 2), with_logdet("a", 4)};
  CHECK(select_canonical_class(four, Selector::Median).class_id == "c");
  CHECK(select_canonical_class(four, Selector::Max).class_id == "a");
  const std::vector<ClassStatistics> tied{with_logdet("z", 1), with_logdet("y", 3)};
  CHECK(select_canonical_class(tied, Selector::Mean).class_id == "y");
  CHECK_THROWS_CODE(select_canonical_class(std::vector<ClassStatistics>{}, Selector::Max),
                    ErrorCode::NoUsableClasses);
  for (auto s : {Selector::Min, Selector::Mean, Selector::Median, Selector::Max}) {
    CHECK(parse_selector(to_string(s)) == s);
  }
}

TEST_CASE("radii from probabilities") {
  CHECK(std::abs(far_to_radius(0.01, 2) * far_to_radius(0.01, 2) - 9.21034037197618) < 1e-10);
  for (int d : {1, 2, 8, 128}) {
    for (double q : {1e-6, 0.01, 0.05, 0.3}) {
      CHECK(rel_err(far_to_radius(q, d), fraction_to_radius(1 - q, d)) < 1e-10);
    }
  }
  CHECK_THROWS_CODE(far_to_radius(0.0, 2), ErrorCode::InvalidProbability);
  CHECK_THROWS_CODE(far_to_radius(1.0, 2), ErrorCode::InvalidProbability);
  CHECK_THROWS_CODE(fraction_to_radius(1.2, 2), ErrorCode::InvalidProbability);
}

TEST_CASE("capacity closed forms") {
  // Proportional ellipsoids at equal radii give k^{d/2}.
  std::mt19937_64 rng(5);
  for (int d : {1, 2, 5}) {
    const Matrix z = test::random_spd(rng, d);
    const double k = 3.5;
    CHECK(std::exp(log_capacity(k * z, z, 2.0, 2.0, Parameterization::FullEllipsoid)) ==
          doctest::Approx(std::pow(k, d / 2.0)).epsilon(1e-12));
  }

  // Isotropic 100 I over I at d = 2 under Shannon pairing.
  std::vector<ClassStatistics> cls{make_class_statistics("a", 5, vec2(0, 0), Matrix::Identity(2, 2)),
                                   make_class_statistics("b", 5, vec2(0, 0), Matrix::Identity(2, 2))};
  PopulationStatistics pop = population_statistics(cls, cls[0]);
  pop.enclosing = 100 * Matrix::Identity(2, 2);
  const double r = far_to_radius(0.01, 2);
  CHECK(fraction_to_radius(0.99, 2) == doctest::Approx(r).epsilon(1e-14));
  const CapacityReport rep = capacity(pop, cls[0], fraction_to_radius(0.99, 2), r);
  CHECK(rep.capacity == doctest::Approx(100.0).epsilon(1e-10));
  CHECK(rep.log10_capacity == doctest::Approx(2.0).epsilon(1e-12));

  // The toy table: numerator is the population covariance itself.
  const Matrix est_pop = (Matrix(2, 2) << 10.84, 0.56, 0.56, 11.57).finished();
  const Matrix est_cls = (Matrix(2, 2) << 4.96, 0.47, 0.47, 6.54).finished();
  const Matrix gt_pop = (Matrix(2, 2) << 10.34, 0.71, 0.71, 11.79).finished();
  const Matrix gt_cls = (Matrix(2, 2) << 4.18, 0.97, 0.97, 5.86).finished();
  CHECK(std::abs(std::exp(log_capacity(est_pop, est_cls, 1, 1, Parameterization::FullEllipsoid)) -
                 1.97) < 0.005);
  CHECK(std::abs(std::exp(log_capacity(gt_pop, gt_cls, 1, 1, Parameterization::FullEllipsoid)) -
                 2.27) < 0.005);
}

TEST_CASE("capacity is invariant under a joint invertible map") {
  std::mt19937_64 rng(7);
  const double r = far_to_radius(0.01, 64);
  for (int k = 0; k < 100; ++k) {
    const Matrix z = test::random_spd(rng, 64);
    const Matrix b = test::random_spd(rng, 64, 0.1);
    const Matrix a = test::random_matrix(rng, 64, 64) + 4.0 * Matrix::Identity(64, 64);
    const double base = log_capacity(b + z, z, 1.3 * r, r, Parameterization::FullEllipsoid);
    const Matrix ez = a * z * a.transpose();
    const Matrix ee = a * (b + z) * a.transpose();
    const double moved = log_capacity(0.5 * (ee + ee.transpose()), 0.5 * (ez + ez.transpose()),
                                      1.3 * r, r, Parameterization::FullEllipsoid);
    CHECK(rel_err(base, moved) <= 1e-6);
  }
}

TEST_CASE("equal radii cancel exactly") {
  std::mt19937_64 rng(8);
  const Matrix z = test::random_spd(rng, 6);
  const Matrix e = z + test::random_spd(rng, 6);
  const double ref = log_capacity(e, z, 1.0, 1.0, Parameterization::FullEllipsoid);
  for (double r : {1e-3, 0.5, 2.0, 17.0, 1e4}) {
    CHECK(std::abs(log_capacity(e, z, r, r, Parameterization::FullEllipsoid) - ref) <= 1e-12);
  }
}

TEST_CASE("isotropic parameterization reduces to trace ratios") {
  std::mt19937_64 rng(9);
  for (int d : {2, 7, 30}) {
    const Matrix z = test::random_spd(rng, d);
    const Matrix e = z + test::random_spd(rng, d);
    const double ry = 3.1, rz = 2.4;
    const double closed = 0.5 * d * std::log((e.trace() / d) / (z.trace() / d)) +
                          d * std::log(ry / rz);
    CHECK(std::abs(log_capacity(e, z, ry, rz, Parameterization::Isotropic) - closed) <=
          1e-10 * std::max(1.0, std::abs(closed)));
  }
}

TEST_CASE("FAR sweep ordering and selector dominance") {
  std::mt19937_64 rng(10);
  const auto classes = random_classes(rng, 12, 6);
  const std::vector<double> fars{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5};
  for (auto p : {Parameterization::Isotropic, Parameterization::AxisAligned,
                 Parameterization::FullEllipsoid}) {
    std::vector<double> min_curve;
    for (auto s : {Selector::Min, Selector::Mean, Selector::Median, Selector::Max}) {
      const ClassStatistics& canon = select_canonical_class(classes, s);
      const auto pop = population_statistics(classes, canon);
      for (bool shannon : {false, true}) {
        const auto rows = capacity_sweep(pop, canon, fars, 0.99, p, shannon, s);
        REQUIRE(rows.size() == fars.size());
        for (std::size_t k = 1; k < rows.size(); ++k) {
          if (shannon) {
            // Paired radii cancel, leaving only the volume ratio.
            CHECK(rows[k].log_capacity == doctest::Approx(rows[0].log_capacity).epsilon(1e-12));
          } else {
            CHECK(rows[k].log_capacity > rows[k - 1].log_capacity);
          }
        }
        if (shannon) {
          for (const auto& r : rows) CHECK(r.r_y == doctest::Approx(r.r_z).epsilon(1e-12));
        }
        if (!shannon && s == Selector::Min) {
          for (const auto& r : rows) min_curve.push_back(r.log_capacity);
        }
        if (!shannon && s == Selector::Max) {
          for (std::size_t k = 0; k < rows.size(); ++k) CHECK(min_curve[k] >= rows[k].log_capacity);
        }
      }
    }
  }
}

TEST_CASE("sweep validation and saturation") {
  std::mt19937_64 rng(11);
  const auto classes = random_classes(rng, 4, 3);
  const auto pop = population_statistics(classes, classes[0]);
  const std::vector<double> bad{0.1, 0.01};
  CHECK_THROWS_CODE(capacity_sweep(pop, classes[0], bad, 0.99, Parameterization::FullEllipsoid),
                    ErrorCode::InvalidArgument);
  const std::vector<double> outside{0.01, 1.0};
  CHECK_THROWS_CODE(capacity_sweep(pop, classes[0], outside, 0.99, Parameterization::FullEllipsoid),
                    ErrorCode::InvalidProbability);

  // FAR close to one drives r_z to zero and the capacity up without bound.
  const double big = log_capacity(pop.enclosing, classes[0].sigma_z, 1.0, 1e-300,
                                  Parameterization::FullEllipsoid);
  CHECK(big > 600);
  const auto sat = capacity(pop, classes[0], 1.0, 1e-300);
  CHECK(sat.saturated);
  CHECK(std::isinf(sat.capacity));
  CHECK(std::isfinite(sat.log10_capacity));
  const std::vector<double> near_one{0.5, 0.9, 0.999999};
  const auto rows = capacity_sweep(pop, classes[0], near_one, 0.99, Parameterization::FullEllipsoid);
  CHECK(rows[2].log_capacity > rows[1].log_capacity);
}

TEST_CASE("estimate_capacity wires the query through") {
  std::mt19937_64 rng(12);
  const auto classes = random_classes(rng, 6, 4);
  CapacityQuery q;
  q.far = 0.05;
  q.shannon_pairing = true;
  q.selector = Selector::Median;
  const CapacityReport r = estimate_capacity(classes, q);
  CHECK(r.population_fraction == doctest::Approx(0.95));
  CHECK(r.r_y == doctest::Approx(r.r_z));
  CHECK(r.canonical_class_id == select_canonical_class(classes, Selector::Median).class_id);
  CHECK(r.d == 4);
  CHECK(to_csv_row(r).rfind(",full,median") != std::string::npos);
}
