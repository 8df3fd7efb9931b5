#include "repcap/projection.hpp"

#include "repcap/error.hpp"
#include "repcap/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace repcap {

std::string_view to_string(DistanceConvention c) noexcept {
  switch (c) {
    case DistanceConvention::OneMinusCos: return "one-minus-cos";
    case DistanceConvention::OnePlusCos: return "one-plus-cos";
    case DistanceConvention::Chordal: return "chordal";
  }
  return "chordal";
}

DistanceConvention parse_distance(std::string_view text) {
  if (text == "one-minus-cos") return DistanceConvention::OneMinusCos;
  if (text == "one-plus-cos") return DistanceConvention::OnePlusCos;
  if (text == "chordal") return DistanceConvention::Chordal;
  throw Error(ErrorCode::InvalidArgument, "unknown distance convention '" + std::string(text) + "'");
}

namespace {

template <typename A, typename B>
double distance_impl(const A& a, const B& b, DistanceConvention c) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vectors of length " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::DegenerateVector, "zero-norm vector");
  const double cosine = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  switch (c) {
    case DistanceConvention::OneMinusCos: return 1.0 - cosine;
    case DistanceConvention::OnePlusCos: return 1.0 + cosine;
    case DistanceConvention::Chordal: return std::sqrt(2.0 * (1.0 - cosine));
  }
  return 0.0;
}

}  // namespace

double high_dim_distance(const Vector& a, const Vector& b, DistanceConvention c) {
  return distance_impl(a, b, c);
}

PairBatch make_pair_batch(const Matrix& inputs, std::vector<IndexPair> pairs,
                          DistanceConvention c) {
  PairBatch batch{inputs, std::move(pairs), Vector(0)};
  batch.targets.resize(static_cast<Eigen::Index>(batch.pairs.size()));
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const auto [a, b] = batch.pairs[k];
    batch.targets[static_cast<Eigen::Index>(k)] =
        distance_impl(inputs.col(a), inputs.col(b), c);
  }
  return batch;
}

namespace {

void require_batch(const PairBatch& batch, const MlpNetwork& net) {
  if (batch.pairs.empty()) throw Error(ErrorCode::InsufficientSamples, "empty pair list");
  if (batch.inputs.rows() != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "pair vectors have length " +
                                                  std::to_string(batch.inputs.rows()) +
                                                  ", network expects " +
                                                  std::to_string(net.input_dim()));
  }
}

}  // namespace

double mds_loss(const PairBatch& batch, const MlpNetwork& net, double lambda) {
  require_batch(batch, net);
  const Matrix y = net.forward(batch.inputs);
  double loss = 0;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const auto [a, b] = batch.pairs[k];
    const double r = batch.targets[static_cast<Eigen::Index>(k)] - (y.col(a) - y.col(b)).norm();
    loss += r * r;
  }
  return loss + lambda * net.squared_norm();
}

double mds_loss(std::span<const std::pair<Vector, Vector>> pairs, const MlpNetwork& net,
                double lambda, DistanceConvention c) {
  if (pairs.empty()) throw Error(ErrorCode::InsufficientSamples, "empty pair list");
  const Eigen::Index dim = pairs.front().first.size();
  Matrix inputs(dim, static_cast<Eigen::Index>(2 * pairs.size()));
  std::vector<IndexPair> index;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [a, b] = pairs[k];
    if (a.size() != dim || b.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "pair vectors differ in length");
    }
    const auto col = static_cast<Eigen::Index>(2 * k);
    inputs.col(col) = a;
    inputs.col(col + 1) = b;
    index.emplace_back(col, col + 1);
  }
  return mds_loss(make_pair_batch(inputs, std::move(index), c), net, lambda);
}

double mds_loss_gradient(const PairBatch& batch, const MlpNetwork& net, double lambda,
                         MlpGradient& grad) {
  require_batch(batch, net);
  ForwardCache cache;
  const Matrix y = net.forward(batch.inputs, DropoutPlan{}, &cache);
  Matrix dy = Matrix::Zero(y.rows(), y.cols());
  double loss = 0;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const auto [a, b] = batch.pairs[k];
    const Vector diff = y.col(a) - y.col(b);
    const double dist = diff.norm();
    const double r = batch.targets[static_cast<Eigen::Index>(k)] - dist;
    loss += r * r;
    if (dist > 0) {
      const Vector g = (-2.0 * r / dist) * diff;
      dy.col(a) += g;
      dy.col(b) -= g;
    }
  }
  grad = MlpGradient(net);
  net.backward(cache, dy, grad);
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    grad.weight[k] += 2.0 * lambda * layers[k].weight;
    grad.bias[k] += 2.0 * lambda * layers[k].bias;
  }
  return loss + lambda * net.squared_norm();
}

MlpNetwork make_projector(int input_dim, int out_dim, int width, int residual_blocks,
                          std::uint64_t seed) {
  std::vector<LayerSpec> specs;
  specs.push_back({width, true, false, 0.0});
  for (int b = 0; b < residual_blocks; ++b) specs.push_back({width, true, true, 0.0});
  specs.push_back({out_dim, false, false, 0.0});
  return MlpNetwork(input_dim, specs, seed);
}

namespace {

std::vector<IndexPair> random_pairs(std::size_t n, std::size_t count, std::mt19937_64& rng) {
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

double mean_residual(const PairBatch& batch, const MlpNetwork& net) {
  return mds_loss(batch, net, 0.0) / static_cast<double>(batch.pairs.size());
}

}  // namespace

ProjectorTraining train_projection(const EmbeddingSet& data, int out_dim,
                                   const ProjectorConfig& cfg) {
  validate(cfg.train);
  if (out_dim < 1 || out_dim >= data.dim()) {
    throw Error(ErrorCode::InvalidTargetDim, "target dimension " + std::to_string(out_dim) +
                                                 " must lie in [1, " +
                                                 std::to_string(data.dim()) + ")");
  }
  if (data.size() < 4) {
    throw Error(ErrorCode::InsufficientSamples, "need at least 4 records to form pairs");
  }

  std::mt19937_64 rng(cfg.train.seed);
  ProjectorTraining result{make_projector(data.dim(), out_dim, cfg.width, cfg.residual_blocks,
                                          derive_seed(cfg.train.seed, 1)),
                           {}};

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val_records(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_records(order.begin() + n_val, order.end());
  if (val_records.size() < 2) val_records = train_records;

  Matrix val_inputs(data.dim(), static_cast<Eigen::Index>(val_records.size()));
  for (std::size_t k = 0; k < val_records.size(); ++k) {
    val_inputs.col(static_cast<Eigen::Index>(k)) = data.vector(val_records[k]);
  }
  const std::size_t n_val_pairs = std::clamp<std::size_t>(2 * val_records.size(), 16, 4096);
  const PairBatch validation = make_pair_batch(
      val_inputs, random_pairs(val_records.size(), n_val_pairs, rng), cfg.distance);
  result.validation_loss.push_back(mean_residual(validation, result.net));

  const std::size_t pairs_per_epoch = train_records.size() / 2;
  const auto batch_pairs = static_cast<std::size_t>(cfg.train.batch_size);
  const std::size_t batches_per_epoch = (pairs_per_epoch + batch_pairs - 1) / batch_pairs;
  const long total_steps = static_cast<long>(batches_per_epoch) * cfg.train.epochs;

  Optimizer opt(cfg.train.optimizer, result.net.parameter_count(), cfg.train.momentum);
  Vector params = result.net.parameters();
  MlpGradient grad;
  long step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::shuffle(train_records.begin(), train_records.end(), rng);
    for (std::size_t first = 0; first < pairs_per_epoch; first += batch_pairs) {
      const std::size_t count = std::min(batch_pairs, pairs_per_epoch - first);
      Matrix inputs(data.dim(), static_cast<Eigen::Index>(2 * count));
      std::vector<IndexPair> pairs;
      pairs.reserve(count);
      for (std::size_t k = 0; k < count; ++k) {
        const auto col = static_cast<Eigen::Index>(2 * k);
        inputs.col(col) = data.vector(train_records[2 * (first + k)]);
        inputs.col(col + 1) = data.vector(train_records[2 * (first + k) + 1]);
        pairs.emplace_back(col, col + 1);
      }
      const PairBatch batch = make_pair_batch(inputs, std::move(pairs), cfg.distance);
      mds_loss_gradient(batch, result.net, cfg.train.reg_lambda, grad);
      opt.step(params, grad.flatten(), scheduled_rate(cfg.train, step++, total_steps));
      result.net.set_parameters(params);
    }
    result.validation_loss.push_back(mean_residual(validation, result.net));
  }
  return result;
}

Vector project(const MlpNetwork& net, const Vector& x) { return net.forward(x); }

Matrix project(const MlpNetwork& net, const Matrix& batch) { return net.forward(batch); }

Vector LinearProjector::project(const Vector& x) const {
  if (x.size() != components.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "input of length " + std::to_string(x.size()) +
                                                  ", projector expects " +
                                                  std::to_string(components.rows()));
  }
  return components.transpose() * (x - mean);
}

Matrix LinearProjector::project(const Matrix& batch) const {
  if (batch.rows() != components.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(batch.rows()) +
                                                  ", projector expects " +
                                                  std::to_string(components.rows()));
  }
  return components.transpose() * (batch.colwise() - mean);
}

LinearProjector fit_pca(const EmbeddingSet& data, int m) {
  if (m < 1 || m > data.dim()) {
    throw Error(ErrorCode::InvalidTargetDim, "PCA dimension " + std::to_string(m) +
                                                 " must lie in [1, " + std::to_string(data.dim()) +
                                                 "]");
  }
  if (data.size() < static_cast<std::size_t>(m) + 1) {
    throw Error(ErrorCode::InsufficientSamples, "PCA to " + std::to_string(m) +
                                                    " dims needs >= " + std::to_string(m + 1) +
                                                    " samples");
  }
  const Matrix& x = data.matrix();
  LinearProjector p;
  p.mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - p.mean;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(x.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Eigen::Index d = cov.rows();
  p.components.resize(d, m);
  p.variances.resize(m);
  for (int k = 0; k < m; ++k) {
    Vector v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    p.components.col(k) = v;
    p.variances[k] = std::max(0.0, eig.eigenvalues()[d - 1 - k]);
  }
  return p;
}

}  // namespace repcap
