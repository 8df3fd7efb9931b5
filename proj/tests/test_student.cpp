#include "repcap/random.hpp"
#include "repcap/student.hpp"

#include "test_util.hpp"

#include <numeric>

using namespace repcap;

namespace {

StudentArchitecture small_arch(double dropout) {
  StudentArchitecture a;
  a.width = 12;
  a.depth = 3;
  a.dropout = dropout;
  return a;
}

// Network whose trunk output is zero, so mu = mu_bias and l = l_bias.
StudentNetwork constant_student(int in, const Vector& mu_bias, const Vector& l_bias) {
  const auto m = mu_bias.size();
  DenseLayer trunk{Matrix::Zero(2, in), Vector::Zero(2), true, false, 0.0};
  DenseLayer mu{Matrix::Zero(m, 2), mu_bias, false, false, 0.0};
  DenseLayer lv{Matrix::Zero(m, 2), l_bias, false, false, 0.0};
  return StudentNetwork{MlpNetwork({trunk}, 0), MlpNetwork({mu}, 0), MlpNetwork({lv}, 0)};
}

EmbeddingSet regression_data(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix x = test::random_matrix(rng, p, n);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back("c" + std::to_string(i % 7));
  return EmbeddingSet(labels, x);
}

// Smooth target with input-dependent noise.
Matrix regression_targets(const EmbeddingSet& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const Matrix& x = data.matrix();
  Matrix y(2, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double s = 0.05 + 0.3 * std::abs(x(1, i));
    y(0, i) = std::sin(x(0, i)) + x(1, i) + s * z(rng);
    y(1, i) = 0.5 * x(2, i) * x(0, i) + 0.1 * z(rng);
  }
  return y;
}

StudentConfig quick_config(double dropout, int epochs) {
  StudentConfig c;
  c.arch = small_arch(dropout);
  c.train.epochs = epochs;
  c.train.batch_size = 32;
  c.train.learning_rate = 3e-3;
  c.train.seed = 21;
  return c;
}

}  // namespace

TEST_CASE("student_loss hand values") {
  const Vector y = (Vector(2) << 0.3, -1.2).finished();
  const StudentNetwork fit = constant_student(3, y, Vector::Zero(2));
  const Matrix x = Matrix::Ones(3, 1);
  const StudentLossWeights zero{0, 0, 0};
  CHECK(student_loss(fit, x, Matrix(y), Vector::Zero(2), Vector::Zero(2), zero) == 0.0);

  const StudentNetwork one = constant_student(3, Vector::Zero(1), Vector::Zero(1));
  const Matrix t = Matrix::Ones(1, 1);
  CHECK(student_loss(one, x, t, Vector::Zero(1), Vector::Zero(1), zero) == doctest::Approx(0.5));

  // Every term by hand: l = log 2, target residual 1, population residual 2.
  const StudentNetwork lv = constant_student(3, Vector::Zero(1), Vector::Constant(1, std::log(2.0)));
  const Vector mu_g = Vector::Constant(1, -1.0), l_g = Vector::Constant(1, std::log(4.0));
  const StudentLossWeights w{0.5, 0.25, 0.125};
  const double l_s = 0.5 * (std::log(2.0) + 1.0 / 2.0);
  const double l_g_term = 0.5 * (std::log(4.0) + 4.0 / 4.0);
  const double l_rs = 2.0 / 2.0;
  const double l_rg = 0.5 * 4.0;
  CHECK(student_loss(lv, x, t, mu_g, l_g, w) ==
        doctest::Approx(l_s + 0.5 * l_g_term + 0.25 * l_rs + 0.125 * l_rg));
  CHECK_THROWS_CODE(student_loss(lv, x, Matrix::Ones(2, 1), mu_g, l_g, w),
                    ErrorCode::DimensionMismatch);
}

TEST_CASE("student objective gradient matches central differences") {
  std::mt19937_64 rng(12);
  const StudentNetwork net = make_student(5, 3, small_arch(0.2), 4);
  const Matrix x = test::random_matrix(rng, 5, 8);
  const Matrix y = test::random_matrix(rng, 3, 8);
  const Vector mu_g = test::random_matrix(rng, 3, 1, 0.3);
  const Vector l_g = test::random_matrix(rng, 3, 1, 0.5);
  const StudentLossWeights w{0.1, 0.05, 0.02};

  for (DropoutMode mode : {DropoutMode::Deterministic, DropoutMode::PerSample}) {
    const DropoutPlan plan{mode, 77};
    StudentGradient grad;
    student_loss_gradient(net, x, y, mu_g, l_g, w, plan, grad);
    const Vector analytic = grad.flatten();
    Vector params(student_parameters(net).size() + 3);
    params << student_parameters(net), l_g;

    StudentNetwork probe = net;
    double worst = 0;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      auto loss = [&](const Vector& p) {
        set_student_parameters(probe, p.head(p.size() - 3));
        return student_loss(probe, x, y, mu_g, p.tail(3), w, plan);
      };
      Vector p = params;
      p[i] += h;
      const double up = loss(p);
      p[i] -= 2 * h;
      const double down = loss(p);
      const double numeric = (up - down) / (2 * h);
      const double tol = 1e-4 * std::max(std::abs(numeric), std::abs(analytic[i])) + 1e-8;
      worst = std::max(worst, std::abs(numeric - analytic[i]) / tol);
    }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("student_loss is invariant to batch order") {
  std::mt19937_64 rng(13);
  const StudentNetwork net = make_student(4, 2, small_arch(0.2), 5);
  const Matrix x = test::random_matrix(rng, 4, 10);
  const Matrix y = test::random_matrix(rng, 2, 10);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(10);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 10, rng);
  const Vector mu_g = Vector::Zero(2), l_g = Vector::Zero(2);
  const StudentLossWeights w;
  CHECK(student_loss(net, Matrix(x * perm), Matrix(y * perm), mu_g, l_g, w) ==
        doctest::Approx(student_loss(net, x, y, mu_g, l_g, w)).epsilon(1e-13));
}

TEST_CASE("student_forward sampling") {
  std::mt19937_64 rng(14);
  const Vector x = test::random_matrix(rng, 6, 1);
  const StudentNetwork plain = make_student(6, 3, small_arch(0.0), 1);
  const auto det = student_forward(plain, x, StudentMode::Deterministic);
  const auto smp = student_forward(plain, x, StudentMode::Sample, 99);
  CHECK(det.mu == smp.mu);
  CHECK(det.logvar == smp.logvar);

  const StudentNetwork drop = make_student(6, 3, small_arch(0.2), 1);
  const auto a = student_forward(drop, x, StudentMode::Sample, 5);
  const auto b = student_forward(drop, x, StudentMode::Sample, 5);
  CHECK(a.mu == b.mu);
  CHECK(a.logvar == b.logvar);
  int differ = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto u = student_forward(drop, x, StudentMode::Sample, 2 * s + 1000);
    const auto v = student_forward(drop, x, StudentMode::Sample, 2 * s + 1001);
    differ += u.mu != v.mu;
  }
  CHECK(differ == 100);
  CHECK_THROWS_CODE(student_forward(drop, Vector(Vector::Zero(5)), StudentMode::Deterministic),
                    ErrorCode::DimensionMismatch);
}

TEST_CASE("mc_infer structure") {
  std::mt19937_64 rng(15);
  const Matrix x = test::random_matrix(rng, 5, 6);

  const StudentNetwork plain = make_student(5, 3, small_arch(0.0), 2);
  const auto est = mc_infer(plain, x, 50, 7);
  const auto det = student_forward(plain, x, DropoutPlan{});
  for (std::size_t i = 0; i < est.size(); ++i) {
    CHECK(est[i].epistemic.isZero(0.0));
    const Matrix diag = det.logvar.col(static_cast<Eigen::Index>(i)).array().exp().matrix().asDiagonal();
    CHECK((est[i].sigma_hat - diag).cwiseAbs().maxCoeff() <= 1e-15 * diag.maxCoeff());
  }

  const StudentNetwork drop = make_student(5, 3, small_arch(0.3), 2);
  for (const auto& e : mc_infer(drop, x, 1, 7)) CHECK(e.epistemic.isZero(0.0));

  const auto batch = mc_infer(drop, x, 40, 9);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const auto single = mc_infer(drop, Vector(x.col(i)), 40, 9);
    const auto& b = batch[static_cast<std::size_t>(i)];
    CHECK((single.mu_hat - b.mu_hat).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((single.sigma_hat - b.sigma_hat).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(b.passes == 40);
    CHECK(b.sigma_hat == b.epistemic + b.aleatoric);
  }

  const auto again = mc_infer(drop, x, 40, 9, 1);
  const auto threaded = mc_infer(drop, x, 40, 9, 3);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].mu_hat == batch[i].mu_hat);
    CHECK(threaded[i].mu_hat == again[i].mu_hat);
    CHECK(threaded[i].sigma_hat == again[i].sigma_hat);
  }
  CHECK_THROWS_CODE(mc_infer(drop, x, 0, 1), ErrorCode::InvalidArgument);
}

TEST_CASE("mc_infer covariances are symmetric PSD on random nets") {
  std::mt19937_64 rng(16);
  for (int k = 0; k < 200; ++k) {
    StudentArchitecture a = small_arch(0.05 + 0.4 * (k % 5) / 5.0);
    a.width = 4 + k % 9;
    const StudentNetwork net = make_student(3, 4, a, static_cast<std::uint64_t>(k));
    const auto e = mc_infer(net, Vector(test::random_matrix(rng, 3, 1, 2.0)), 1 + k % 30,
                            static_cast<std::uint64_t>(k));
    CHECK((e.sigma_hat - e.sigma_hat.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(e.sigma_hat);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("train_student errors") {
  const EmbeddingSet data = regression_data(20, 3, 1);
  const StudentConfig c = quick_config(0.1, 1);
  CHECK_THROWS_CODE(train_student(EmbeddingSet(3), Matrix(2, 0), c), ErrorCode::InsufficientSamples);
  CHECK_THROWS_CODE(train_student(data, Matrix::Zero(2, 19), c), ErrorCode::DimensionMismatch);
}

TEST_CASE("train_student on constant targets") {
  const EmbeddingSet data = regression_data(200, 4, 2);
  const Vector c = (Vector(2) << 1.5, -0.25).finished();
  const Matrix targets = c.replicate(1, 200);
  StudentConfig cfg = quick_config(0.1, 1000);
  const StudentModel m = train_student(data, targets, cfg);
  const auto est = mc_infer(m.net, data.matrix(), 20, 3);
  for (const auto& e : est) CHECK((e.mu_hat - c).cwiseAbs().maxCoeff() < 1e-2);
  CHECK(m.mu_g.isApprox(c));
  // Predicted variances collapse from their initialization.
  const StudentNetwork init = make_student(4, 2, cfg.arch, derive_seed(cfg.train.seed, 7));
  const auto before = student_forward(init, data.matrix(), DropoutPlan{});
  const auto after = student_forward(m.net, data.matrix(), DropoutPlan{});
  CHECK(after.logvar.mean() < before.logvar.mean() - 2.0);
}

TEST_CASE("train_student without auxiliary terms is heteroscedastic regression") {
  const EmbeddingSet data = regression_data(400, 4, 3);
  const Matrix y = regression_targets(data, 4);
  StudentConfig cfg = quick_config(0.0, 40);
  cfg.weights = {0, 0, 0};
  const StudentModel m = train_student(data, y, cfg);
  CHECK(m.validation_loss.size() == 41);
  CHECK(m.validation_loss.back() <= 0.9 * m.validation_loss.front());

  const StudentModel again = train_student(data, y, cfg);
  CHECK(student_parameters(again.net) == student_parameters(m.net));
  CHECK(again.l_g == m.l_g);
}

TEST_CASE("training is equivariant to per-dimension affine rescaling") {
  // Standardization is folded into the network, so rescaled inputs and
  // targets give rescaled outputs.
  const EmbeddingSet data = regression_data(150, 3, 5);
  const Matrix y = regression_targets(data, 6);
  const StudentConfig cfg = quick_config(0.1, 5);
  const StudentModel base = train_student(data, y, cfg);

  const Vector in_scale = (Vector(3) << 10.0, 0.01, 3.0).finished();
  const Vector in_shift = (Vector(3) << -5.0, 100.0, 0.5).finished();
  const Vector out_scale = (Vector(2) << 1000.0, 0.5).finished();
  const Vector out_shift = (Vector(2) << 7.0, -3.0).finished();
  const Matrix xs = (in_scale.asDiagonal() * data.matrix()).colwise() + in_shift;
  const Matrix ys = (out_scale.asDiagonal() * y).colwise() + out_shift;
  const StudentModel scaled = train_student(EmbeddingSet(data.labels(), xs), ys, cfg);

  const auto a = student_forward(base.net, data.matrix(), DropoutPlan{});
  const auto b = student_forward(scaled.net, xs, DropoutPlan{});
  const Matrix mapped = (out_scale.asDiagonal() * a.mu).colwise() + out_shift;
  CHECK(((b.mu - mapped).array().colwise() / out_scale.array()).abs().maxCoeff() < 1e-6);
  const Vector log_s2 = 2.0 * out_scale.array().log().matrix();
  CHECK(((b.logvar - a.logvar).colwise() - log_s2).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(((scaled.l_g - base.l_g) - log_s2).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pairing names") {
  for (auto p : {TargetPairing::Self, TargetPairing::ClassResampled}) {
    CHECK(parse_pairing(to_string(p)) == p);
  }
  CHECK_THROWS_CODE(parse_pairing("other"), ErrorCode::InvalidArgument);
  CHECK(StudentConfig{}.arch.dropout == 0.2);
}

TEST_CASE("Monte-Carlo mean converges at the square-root rate") {
  std::mt19937_64 rng(17);
  StudentArchitecture a = small_arch(0.2);
  a.width = 32;
  const StudentNetwork net = make_student(6, 4, a, 3);
  const Matrix x = test::random_matrix(rng, 6, 64);
  std::vector<double> lt, ld;
  for (int t : {10, 40, 160, 640}) {
    const auto e1 = mc_infer(net, x, t, 1);
    const auto e2 = mc_infer(net, x, 2 * t, 1);
    double sum = 0;
    for (std::size_t i = 0; i < e1.size(); ++i) sum += (e2[i].mu_hat - e1[i].mu_hat).norm();
    lt.push_back(std::log(t));
    ld.push_back(std::log(sum / static_cast<double>(e1.size())));
  }
  const double mt = std::accumulate(lt.begin(), lt.end(), 0.0) / 4;
  const double md = std::accumulate(ld.begin(), ld.end(), 0.0) / 4;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 4; ++k) {
    sxy += (lt[k] - mt) * (ld[k] - md);
    sxx += (lt[k] - mt) * (lt[k] - mt);
  }
  const double slope = sxy / sxx;
  MESSAGE("slope " << slope);
  CHECK(std::abs(slope + 0.5) <= 0.2);
}
