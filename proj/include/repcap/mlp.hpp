#pragma once

// Fully-connected network with leaky-rectifier units, optional residual
// layers and per-layer dropout. Batches are column-major: one sample per
// column. Serves as the manifold projector and as the student trunk/heads.

#include "repcap/stats.hpp"

#include <cstdint>
#include <vector>

namespace repcap {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  bool activated = true;
  bool residual = false;  // out = in + act(W in + b); needs a square weight
  double dropout = 0.0;   // applied to the layer output
};

struct LayerSpec {
  int width = 0;
  bool activated = true;
  bool residual = false;
  double dropout = 0.0;
};

enum class DropoutMode {
  Deterministic,  // no masks; outputs scaled by the keep probability
  PerSample,      // independent Bernoulli mask per sample (training)
  Shared,         // one mask per layer for the whole batch (a weight draw)
};

struct DropoutPlan {
  DropoutMode mode = DropoutMode::Deterministic;
  std::uint64_t seed = 0;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // W h + b
  std::vector<Matrix> scale;   // dropout multiplier per layer (empty: none)
};

class MlpNetwork;

struct MlpGradient {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  MlpGradient() = default;
  explicit MlpGradient(const MlpNetwork& net);
  void set_zero();
  Vector flatten() const;
};

class MlpNetwork {
 public:
  static constexpr double kDefaultSlope = 0.01;

  MlpNetwork() = default;
  /// Scaled-uniform fan-in initialization (variance 1/fan_in), zero biases.
  MlpNetwork(int input_dim, const std::vector<LayerSpec>& specs, std::uint64_t seed,
             double negative_slope = kDefaultSlope);
  /// Takes layers as-is after checking dimensional consistency.
  MlpNetwork(std::vector<DenseLayer> layers, std::uint64_t seed,
             double negative_slope = kDefaultSlope);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> layer_sizes() const;
  std::vector<double> dropout_rates() const;
  bool has_dropout() const;
  std::uint64_t seed() const noexcept { return seed_; }
  double negative_slope() const noexcept { return slope_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  Matrix forward(const Matrix& inputs, const DropoutPlan& plan = {},
                 ForwardCache* cache = nullptr) const;
  /// Deterministic single-sample forward pass.
  Vector forward(const Vector& x) const;

  /// Accumulates parameter gradients into `grad`; optionally returns dL/dinput.
  void backward(const ForwardCache& cache, const Matrix& grad_out, MlpGradient& grad,
                Matrix* grad_input = nullptr) const;

  Eigen::Index parameter_count() const;
  /// Layer order; weight (column-major) then bias per layer.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  double squared_norm() const;

 private:
  void validate() const;
  double activate(double v) const { return v > 0 ? v : slope_ * v; }

  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
  double slope_ = kDefaultSlope;
};

}  // namespace repcap
