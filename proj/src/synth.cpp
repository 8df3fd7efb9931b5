#include "repcap/synth.hpp"

#include "repcap/error.hpp"
#include "repcap/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace repcap {

namespace {

constexpr std::uint64_t kCenterStream = 0xC3;
constexpr std::uint64_t kJitterStream = 0x5C;
constexpr std::uint64_t kFrameStream = 0xF4;
constexpr std::uint64_t kBetweenStream = 0xB7;
constexpr std::uint64_t kClassStreamBase = 1000;

Matrix random_orthonormal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix column signs so the frame does not depend on QR sign conventions.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix rotation_2d(double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

void require_psd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be square");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, m.diagonal().cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not PSD");
  }
}

}  // namespace

std::string class_label(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "c" + digits;
}

Matrix symmetric_sqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

GaussianSampler::GaussianSampler(Vector mean, const Matrix& cov)
    : mean_(std::move(mean)), root_(symmetric_sqrt(cov)) {
  if (root_.rows() != mean_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sampler mean and covariance differ in size");
  }
}

Vector GaussianSampler::operator()(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  Vector z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean_ + root_ * z;
}

Vector standard_normal(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector z(dim);
  for (int i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

// ---------------------------------------------------------------- toy

void ToySpec::validate() const {
  if (n_classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "toy needs at least 2 classes");
  }
  if (samples_per_class < 1) {
    throw Error(ErrorCode::InvalidArgument, "samples_per_class must be positive");
  }
  if (population_cov.rows() != 2 || class_cov_template.rows() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "toy covariances must be 2x2");
  }
  require_psd(population_cov, "population covariance");
  require_psd(class_cov_template, "class covariance template");
  if (!(jitter_low > 0 && jitter_low <= jitter_high)) {
    throw Error(ErrorCode::InvalidArgument, "jitter range must satisfy 0 < low <= high");
  }
}

ToyData generate_toy(const ToySpec& spec) {
  spec.validate();
  const int n = spec.n_classes;

  std::mt19937_64 jitter_rng(derive_seed(spec.seed, kJitterStream));
  std::uniform_real_distribution<double> scale_dist(spec.jitter_low, spec.jitter_high);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> scales(n), angles(n);
  for (int c = 0; c < n; ++c) {
    scales[c] = scale_dist(jitter_rng);
    angles[c] = angle_dist(jitter_rng);
  }
  const int max_class =
      static_cast<int>(std::max_element(scales.begin(), scales.end()) - scales.begin());
  const double top = scales[max_class];

  ToyData data;
  data.max_class = max_class;
  data.population = GaussianModel(Vector::Zero(2), spec.population_cov);
  data.samples = EmbeddingSet(2);

  std::mt19937_64 center_rng(derive_seed(spec.seed, kCenterStream));
  const GaussianSampler center_sampler(Vector::Zero(2), spec.population_cov);
  for (int c = 0; c < n; ++c) {
    const Vector center = center_sampler(center_rng);
    Matrix cov = spec.class_cov_template;
    if (c != max_class) {
      const Matrix r = rotation_2d(angles[c]);
      cov = (scales[c] / top) * (r * spec.class_cov_template * r.transpose());
      cov = 0.5 * (cov + cov.transpose());
    }
    data.classes.emplace_back(center, cov);

    std::mt19937_64 rng(derive_seed(spec.seed, kClassStreamBase + static_cast<std::uint64_t>(c)));
    const GaussianSampler sampler(center, cov);
    const std::string label = class_label(c);
    for (int s = 0; s < spec.samples_per_class; ++s) data.samples.add(label, sampler(rng));
  }
  return data;
}

std::vector<Vector> convex_hull_2d(std::span<const Vector> points) {
  std::vector<std::pair<double, double>> p;
  p.reserve(points.size());
  for (const auto& v : points) {
    if (v.size() != 2) throw Error(ErrorCode::DimensionMismatch, "hull points must be 2D");
    p.emplace_back(v[0], v[1]);
  }
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) throw Error(ErrorCode::DegenerateHull, "fewer than 3 distinct points");

  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw Error(ErrorCode::DegenerateHull, "points are collinear");

  std::vector<Vector> out;
  for (const auto& [x, y] : hull) out.push_back((Vector(2) << x, y).finished());
  return out;
}

double convex_hull_area_2d(std::span<const Vector> points) {
  const std::vector<Vector> hull = convex_hull_2d(points);
  double twice = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vector& a = hull[i];
    const Vector& b = hull[(i + 1) % hull.size()];
    twice += a[0] * b[1] - a[1] * b[0];
  }
  const double area = 0.5 * std::abs(twice);
  if (!(area > 0)) throw Error(ErrorCode::DegenerateHull, "hull has zero area");
  return area;
}

double toy_ground_truth_capacity(const Matrix& population_cov, const Matrix& class_cov) {
  return std::exp(0.5 * (log_det(population_cov) - log_det(class_cov)));
}

ToyResult toy_capacity_experiment(const ToySpec& spec) {
  return toy_capacity_experiment(generate_toy(spec));
}

ToyResult toy_capacity_experiment(const ToyData& data) {
  ToyResult r;
  r.ground_truth_capacity = toy_ground_truth_capacity(
      data.population.covariance(), data.classes[static_cast<std::size_t>(data.max_class)].covariance());

  std::vector<ClassStatistics> fitted;
  std::vector<Vector> means;
  double class_hull = 0;
  std::vector<Vector> all;
  for (const auto& [label, members] : data.samples.groups()) {
    std::vector<Vector> pts;
    for (std::size_t i : members) pts.emplace_back(data.samples.vector(i));
    all.insert(all.end(), pts.begin(), pts.end());
    const GaussianModel g = estimate_gaussian(pts);
    means.push_back(g.mean());
    fitted.push_back(make_class_statistics(label, static_cast<int>(pts.size()), g.mean(),
                                           g.covariance()));
    class_hull = std::max(class_hull, convex_hull_area_2d(pts));
  }
  const ClassStatistics& largest = select_canonical_class(fitted, Selector::Max);
  r.estimated_population_cov = between_class_scatter(means);
  r.estimated_class_cov = largest.sigma_z;
  r.estimated_class_id = largest.class_id;
  r.estimated_capacity = toy_ground_truth_capacity(r.estimated_population_cov, largest.sigma_z);

  r.population_hull_area = convex_hull_area_2d(all);
  r.class_hull_area = class_hull;
  r.hull_capacity = r.population_hull_area / r.class_hull_area;
  return r;
}

// ------------------------------------------------------- synthetic teacher

void SyntheticTeacherSpec::validate() const {
  if (latent_dim < 1 || ambient_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "dimensions must be positive");
  }
  if (lift.identity ? ambient_dim != latent_dim : latent_dim >= ambient_dim) {
    throw Error(ErrorCode::InvalidArgument,
                lift.identity ? "identity lift needs ambient_dim == latent_dim"
                              : "latent_dim must be smaller than ambient_dim");
  }
  if (n_classes < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 classes");
  if (samples_per_class < 1) {
    throw Error(ErrorCode::InvalidArgument, "samples_per_class must be positive");
  }
  if (between_class_cov.rows() != latent_dim || within_class_cov.rows() != latent_dim) {
    throw Error(ErrorCode::DimensionMismatch, "latent covariances must be latent_dim square");
  }
  require_psd(between_class_cov, "between-class covariance");
  require_psd(within_class_cov, "within-class covariance");
  if (!(within_scale_low > 0 && within_scale_low <= within_scale_high)) {
    throw Error(ErrorCode::InvalidArgument, "within scale range must satisfy 0 < low <= high");
  }
  if (!lift.identity && !(lift.curvature >= 0)) {
    throw Error(ErrorCode::InvalidArgument, "lift curvature must be nonnegative");
  }
}

SyntheticTeacherSpec SyntheticTeacherSpec::defaults(std::uint64_t seed, int latent_dim,
                                                    int ambient_dim) {
  if (latent_dim < 1) throw Error(ErrorCode::InvalidArgument, "latent_dim must be positive");
  SyntheticTeacherSpec s;
  s.seed = seed;
  s.latent_dim = latent_dim;
  s.ambient_dim = ambient_dim;
  const int m = latent_dim;
  std::mt19937_64 rng(derive_seed(seed, kBetweenStream));
  const Matrix rot = random_orthonormal(m, m, rng);
  const Vector variances = m == 1 ? Vector(Vector::Constant(1, 2.5)) : Vector(Vector::LinSpaced(m, 1.0, 4.0));
  s.between_class_cov = rot * variances.asDiagonal() * rot.transpose();
  s.between_class_cov = 0.5 * (s.between_class_cov + s.between_class_cov.transpose()).eval();
  s.within_class_cov = 0.04 * Matrix::Identity(m, m);
  return s;
}

SyntheticTeacherSpec SyntheticTeacherSpec::isotropic(std::uint64_t seed, int latent_dim,
                                                     int ambient_dim) {
  if (latent_dim < 1) throw Error(ErrorCode::InvalidArgument, "latent_dim must be positive");
  SyntheticTeacherSpec s;
  s.seed = seed;
  s.latent_dim = latent_dim;
  s.ambient_dim = ambient_dim;
  s.between_class_cov = 4.0 * Matrix::Identity(s.latent_dim, s.latent_dim);
  s.within_class_cov = 0.04 * Matrix::Identity(s.latent_dim, s.latent_dim);
  return s;
}

Matrix apply_lift(const LiftSpec& lift, const Matrix& frame, const Matrix& latent) {
  if (lift.identity) return latent;
  if (frame.cols() != latent.rows() + 1) {
    throw Error(ErrorCode::DimensionMismatch, "lift frame does not match latent dimension");
  }
  Matrix a = frame.leftCols(latent.rows()) * latent;
  a.colwise() += lift.offset * frame.col(latent.rows());
  if (lift.curvature > 0) {
    const double k = lift.curvature;
    a = ((k * a.array()).tanh() / k).matrix();
  }
  if (lift.normalize) a.colwise().normalize();
  return a;
}

SyntheticTeacher generate_synthetic_teacher(const SyntheticTeacherSpec& spec) {
  spec.validate();
  const int m = spec.latent_dim;
  const int n = spec.n_classes;

  SyntheticTeacher out;
  TeacherGroundTruth& t = out.truth;
  t.between_class_cov = spec.between_class_cov;

  std::mt19937_64 jitter_rng(derive_seed(spec.seed, kJitterStream));
  std::uniform_real_distribution<double> scale_dist(spec.within_scale_low, spec.within_scale_high);
  std::mt19937_64 center_rng(derive_seed(spec.seed, kCenterStream));
  const GaussianSampler center_sampler(Vector::Zero(m), spec.between_class_cov);

  std::vector<std::string> labels;
  t.latent.resize(m, static_cast<Eigen::Index>(n) * spec.samples_per_class);
  Eigen::Index col = 0;
  for (int c = 0; c < n; ++c) {
    const Vector center = center_sampler(center_rng);
    const double s = spec.within_scale_low == spec.within_scale_high ? spec.within_scale_low
                                                                     : scale_dist(jitter_rng);
    const Matrix cov = s * spec.within_class_cov;
    t.class_ids.push_back(class_label(c));
    t.centers.push_back(center);
    t.class_covs.push_back(cov);

    std::mt19937_64 rng(derive_seed(spec.seed, kClassStreamBase + static_cast<std::uint64_t>(c)));
    const GaussianSampler sampler(center, cov);
    for (int k = 0; k < spec.samples_per_class; ++k) {
      t.latent.col(col++) = sampler(rng);
      labels.push_back(t.class_ids.back());
    }
  }

  if (!spec.lift.identity) {
    std::mt19937_64 frame_rng(derive_seed(spec.seed, kFrameStream));
    t.frame = random_orthonormal(spec.ambient_dim, m + 1, frame_rng);
  }
  out.embeddings = EmbeddingSet(std::move(labels), apply_lift(spec.lift, t.frame, t.latent));
  return out;
}

CapacityReport oracle_capacity(const TeacherGroundTruth& truth, const CapacityQuery& query) {
  std::vector<ClassStatistics> classes;
  for (std::size_t c = 0; c < truth.class_ids.size(); ++c) {
    classes.push_back(make_class_statistics(truth.class_ids[c], 0, truth.centers[c],
                                            truth.class_covs[c]));
  }
  const ClassStatistics& canonical = select_canonical_class(classes, query.selector);
  PopulationStatistics pop;
  pop.n_classes = static_cast<int>(classes.size());
  pop.mu_y = Vector::Zero(truth.between_class_cov.rows());
  pop.scatter_b = truth.between_class_cov;
  pop.enclosing = truth.between_class_cov + canonical.sigma_c_avg;
  pop.sigma_y = truth.between_class_cov;
  const double far[] = {query.far};
  return capacity_sweep(pop, canonical, far, query.population_fraction, query.parameterization,
                        query.shannon_pairing, query.selector)
      .front();
}

std::vector<ClassStatistics> latent_class_statistics(const TeacherGroundTruth& truth,
                                                     std::span<const std::string> labels) {
  if (labels.size() != static_cast<std::size_t>(truth.latent.cols())) {
    throw Error(ErrorCode::DimensionMismatch, "one label per latent record required");
  }
  std::map<std::string, std::vector<Vector>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].emplace_back(truth.latent.col(static_cast<Eigen::Index>(i)));
  }
  std::vector<ClassStatistics> out;
  for (const auto& [id, pts] : groups) {
    if (pts.size() < 2) continue;
    const GaussianModel g = estimate_gaussian(pts);
    out.push_back(make_class_statistics(id, static_cast<int>(pts.size()), g.mean(),
                                        g.covariance()));
  }
  return out;
}

// -------------------------------------------------------------- verification

std::vector<IndexPair> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "need at least 2 records for pairs");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<IndexPair> pairs;
  pairs.reserve(count);
  while (pairs.size() < count) {
    const auto a = pick(rng);
    const auto b = pick(rng);
    if (a != b) pairs.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  return pairs;
}

VerificationPairs sample_verification_pairs(std::span<const std::string> labels,
                                            std::size_t count, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  if (groups.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples, "verification needs at least 2 classes");
  }
  std::vector<const std::vector<std::size_t>*> multi;
  std::vector<std::size_t> pool;
  for (const auto& [id, members] : groups) {
    if (members.size() >= 2) {
      multi.push_back(&members);
      pool.insert(pool.end(), members.begin(), members.end());
    }
  }
  if (multi.empty()) {
    throw Error(ErrorCode::InsufficientSamples, "no class has two records for genuine pairs");
  }
  std::map<std::size_t, const std::vector<std::size_t>*> owner;
  for (const auto* g : multi) {
    for (std::size_t i : *g) owner[i] = g;
  }

  std::mt19937_64 rng(seed);
  VerificationPairs out;
  std::uniform_int_distribution<std::size_t> pick_pool(0, pool.size() - 1);
  while (out.genuine.size() < count) {
    const std::size_t a = pool[pick_pool(rng)];
    const auto& members = *owner[a];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const std::size_t b = members[pick(rng)];
    if (a != b) out.genuine.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  std::uniform_int_distribution<std::size_t> pick_any(0, labels.size() - 1);
  while (out.impostor.size() < count) {
    const std::size_t a = pick_any(rng);
    const std::size_t b = pick_any(rng);
    if (labels[a] != labels[b]) {
      out.impostor.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return out;
}

std::vector<double> pair_distances(const Matrix& vectors, std::span<const IndexPair> pairs) {
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& [a, b] : pairs) d.push_back((vectors.col(a) - vectors.col(b)).squaredNorm());
  return d;
}

std::vector<RocPoint> roc_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                 std::span<const double> far_grid) {
  if (genuine.empty() || impostor.empty()) {
    throw Error(ErrorCode::InsufficientSamples, "ROC needs genuine and impostor scores");
  }
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::sort(imp.begin(), imp.end());
  std::sort(gen.begin(), gen.end());
  std::vector<RocPoint> roc;
  for (double q : far_grid) {
    if (!(q > 0 && q <= 1)) throw Error(ErrorCode::InvalidProbability, "FAR outside (0, 1]");
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(imp.size())));
    const double threshold = imp[std::clamp<std::size_t>(rank, 1, imp.size()) - 1];
    const auto accepted = std::upper_bound(gen.begin(), gen.end(), threshold) - gen.begin();
    roc.push_back({q, static_cast<double>(accepted) / static_cast<double>(gen.size()), threshold});
  }
  return roc;
}

std::vector<RocPoint> verification_eval(const EmbeddingSet& embeddings, std::size_t pair_count,
                                        std::span<const double> far_grid, std::uint64_t seed) {
  const VerificationPairs pairs = sample_verification_pairs(embeddings.labels(), pair_count, seed);
  return roc_at_far(pair_distances(embeddings.matrix(), pairs.genuine),
                    pair_distances(embeddings.matrix(), pairs.impostor), far_grid);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "spearman: size mismatch");
  if (a.size() < 2) throw Error(ErrorCode::InsufficientSamples, "spearman needs 2 values");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace repcap
