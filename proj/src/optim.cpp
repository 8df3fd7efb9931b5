#include "repcap/optim.hpp"

#include "repcap/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace repcap {

std::string_view to_string(OptimizerKind k) noexcept {
  return k == OptimizerKind::Adam ? "adam" : "sgd";
}

std::string_view to_string(LrSchedule s) noexcept {
  return s == LrSchedule::Cosine ? "cosine" : "constant";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::SgdMomentum;
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + std::string(text) + "'");
}

LrSchedule parse_schedule(std::string_view text) {
  if (text == "cosine") return LrSchedule::Cosine;
  if (text == "constant") return LrSchedule::Constant;
  throw Error(ErrorCode::InvalidArgument, "unknown schedule '" + std::string(text) + "'");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (cfg.epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0");
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (cfg.reg_lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
}

double scheduled_rate(const TrainConfig& cfg, long step, long total_steps) {
  if (cfg.schedule == LrSchedule::Constant || total_steps <= 1) return cfg.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * progress));
}

Optimizer::Optimizer(OptimizerKind kind, Eigen::Index n, double momentum)
    : kind_(kind), momentum_(momentum), m_(Vector::Zero(n)) {
  if (kind_ == OptimizerKind::Adam) v_ = Vector::Zero(n);
}

void Optimizer::step(Vector& params, const Vector& grad, double lr) {
  ++t_;
  if (kind_ == OptimizerKind::SgdMomentum) {
    m_ = momentum_ * m_ + grad;
    params -= lr * m_;
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

}  // namespace repcap
