#include "repcap/mlp.hpp"

#include "repcap/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace repcap {

MlpGradient::MlpGradient(const MlpNetwork& net) {
  for (const auto& layer : net.layers()) {
    weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    bias.push_back(Vector::Zero(layer.bias.size()));
  }
}

void MlpGradient::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

Vector MlpGradient::flatten() const {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) n += weight[i].size() + bias[i].size();
  Vector flat(n);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    flat.segment(pos, weight[i].size()) = weight[i].reshaped();
    pos += weight[i].size();
    flat.segment(pos, bias[i].size()) = bias[i];
    pos += bias[i].size();
  }
  return flat;
}

MlpNetwork::MlpNetwork(int input_dim, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                       double negative_slope)
    : seed_(seed), slope_(negative_slope) {
  if (input_dim < 1 || specs.empty()) {
    throw Error(ErrorCode::InvalidArgument, "network needs an input width and >= 1 layer");
  }
  std::mt19937_64 rng(seed);
  int fan_in = input_dim;
  for (const auto& spec : specs) {
    if (spec.width < 1) throw Error(ErrorCode::InvalidArgument, "layer width must be positive");
    DenseLayer layer;
    const double limit = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> init(-limit, limit);
    layer.weight.resize(spec.width, fan_in);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = init(rng);
    }
    layer.bias = Vector::Zero(spec.width);
    layer.activated = spec.activated;
    layer.residual = spec.residual;
    layer.dropout = spec.dropout;
    layers_.push_back(std::move(layer));
    fan_in = spec.width;
  }
  validate();
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers, std::uint64_t seed, double negative_slope)
    : layers_(std::move(layers)), seed_(seed), slope_(negative_slope) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "network needs >= 1 layer");
  validate();
}

void MlpNetwork::validate() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(i) + " bias length");
    }
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "layer " + std::to_string(i) + " input width does not match previous output");
    }
    if (l.residual && l.weight.rows() != l.weight.cols()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "residual layer " + std::to_string(i) + " must have equal in/out width");
    }
    if (!(l.dropout >= 0.0 && l.dropout < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in [0, 1)");
    }
  }
}

int MlpNetwork::input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
int MlpNetwork::output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> MlpNetwork::layer_sizes() const {
  std::vector<int> sizes{input_dim()};
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

std::vector<double> MlpNetwork::dropout_rates() const {
  std::vector<double> rates;
  for (const auto& l : layers_) rates.push_back(l.dropout);
  return rates;
}

bool MlpNetwork::has_dropout() const {
  for (const auto& l : layers_) {
    if (l.dropout > 0) return true;
  }
  return false;
}

Matrix MlpNetwork::forward(const Matrix& inputs, const DropoutPlan& plan,
                           ForwardCache* cache) const {
  if (inputs.rows() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(inputs.rows()) +
                                                  ", network expects " +
                                                  std::to_string(input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->scale.clear();
  }
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix h = inputs;
  for (const auto& layer : layers_) {
    Matrix pre = layer.weight * h;
    pre.colwise() += layer.bias;
    Matrix out = layer.activated ? pre.unaryExpr([this](double v) { return activate(v); }).eval()
                                 : pre;
    if (layer.residual) out += h;

    Matrix scale;
    if (layer.dropout > 0) {
      const double keep = 1.0 - layer.dropout;
      switch (plan.mode) {
        case DropoutMode::Deterministic:
          scale = Matrix::Constant(1, 1, keep);
          out *= keep;
          break;
        case DropoutMode::PerSample:
          scale.resize(out.rows(), out.cols());
          for (Eigen::Index i = 0; i < scale.size(); ++i) {
            scale.data()[i] = unit(rng) < layer.dropout ? 0.0 : 1.0;
          }
          out.array() *= scale.array();
          break;
        case DropoutMode::Shared: {
          Vector mask(out.rows());
          for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask[i] = unit(rng) < layer.dropout ? 0.0 : 1.0;
          }
          scale = mask.replicate(1, out.cols());
          out.array() *= scale.array();
          break;
        }
      }
    }
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
      cache->scale.push_back(std::move(scale));
    }
    h = std::move(out);
  }
  return h;
}

Vector MlpNetwork::forward(const Vector& x) const {
  return forward(Matrix(x), DropoutPlan{}).col(0);
}

void MlpNetwork::backward(const ForwardCache& cache, const Matrix& grad_out, MlpGradient& grad,
                          Matrix* grad_input) const {
  Matrix d = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix& scale = cache.scale[k];
    if (scale.size() == 1) {
      d *= scale(0, 0);
    } else if (scale.size() > 0) {
      d.array() *= scale.array();
    }
    Matrix dpre = d;
    if (layer.activated) {
      dpre.array() *= cache.pre[k].array().unaryExpr(
          [this](double v) { return v > 0 ? 1.0 : slope_; });
    }
    grad.weight[k].noalias() += dpre * cache.inputs[k].transpose();
    grad.bias[k] += dpre.rowwise().sum();
    if (k == 0 && !grad_input) break;
    Matrix dh = layer.weight.transpose() * dpre;
    if (layer.residual) dh += d;
    d = std::move(dh);
  }
  if (grad_input) *grad_input = std::move(d);
}

Eigen::Index MlpNetwork::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector MlpNetwork::parameters() const {
  Vector flat(parameter_count());
  Eigen::Index pos = 0;
  for (const auto& l : layers_) {
    flat.segment(pos, l.weight.size()) = l.weight.reshaped();
    pos += l.weight.size();
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void MlpNetwork::set_parameters(const Vector& flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "parameter vector has length " +
                                                  std::to_string(flat.size()) + ", expected " +
                                                  std::to_string(parameter_count()));
  }
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = flat.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

double MlpNetwork::squared_norm() const {
  double s = 0;
  for (const auto& l : layers_) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

}  // namespace repcap
