#pragma once

#include "repcap/stats.hpp"

#include <cstdint>
#include <string_view>

namespace repcap {

enum class OptimizerKind { SgdMomentum, Adam };
enum class LrSchedule { Constant, Cosine };

std::string_view to_string(OptimizerKind k) noexcept;
std::string_view to_string(LrSchedule s) noexcept;
OptimizerKind parse_optimizer(std::string_view text);
LrSchedule parse_schedule(std::string_view text);

/// Shared optimization settings. `batch_size` counts pairs for the
/// projector and samples for the student.
struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 256;
  int epochs = 100;
  double reg_lambda = 3e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  LrSchedule schedule = LrSchedule::Cosine;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// Learning rate at `step` of `total_steps`.
double scheduled_rate(const TrainConfig& cfg, long step, long total_steps);

/// First-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, Eigen::Index n, double momentum = 0.9);
  void step(Vector& params, const Vector& grad, double lr);

 private:
  OptimizerKind kind_;
  double momentum_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace repcap
