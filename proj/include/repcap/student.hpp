#pragma once

// Heteroscedastic student with dropout. It reproduces the teacher's
// low-dimensional targets and predicts per-dimension log variances
// (aleatoric); Monte-Carlo dropout passes add the epistemic part.

#include "repcap/embedding.hpp"
#include "repcap/mlp.hpp"
#include "repcap/optim.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace repcap {

struct StudentNetwork {
  MlpNetwork trunk;        // every layer leaky + dropout
  MlpNetwork mu_head;      // linear, trunk width -> m
  MlpNetwork logvar_head;  // linear, trunk width -> m

  int input_dim() const { return trunk.input_dim(); }
  int output_dim() const { return mu_head.output_dim(); }
};

struct StudentArchitecture {
  int width = 512;
  int depth = 3;  // trunk layers; all but the first are residual
  double dropout = 0.2;
  double initial_log_variance = -4.605170185988091;  // log(0.1^2)
};

StudentNetwork make_student(int input_dim, int out_dim, const StudentArchitecture& arch,
                            std::uint64_t seed);

struct StudentOutput {
  Matrix mu;      // m x batch
  Matrix logvar;  // m x batch
};

struct StudentCache {
  ForwardCache trunk;
  ForwardCache mu;
  ForwardCache logvar;
};

StudentOutput student_forward(const StudentNetwork& net, const Matrix& inputs,
                              const DropoutPlan& plan, StudentCache* cache = nullptr);

enum class StudentMode { Sample, Deterministic };

/// Single input. Sample mode draws one mask per layer from `seed`.
StudentOutput student_forward(const StudentNetwork& net, const Vector& x, StudentMode mode,
                              std::uint64_t seed = 0);

struct StudentLossWeights {
  double lambda = 0.1;   // population likelihood
  double gamma = 1e-3;   // aleatoric variance regularizer
  double delta = 1e-3;   // population variance regularizer
};

struct StudentGradient {
  MlpGradient trunk;
  MlpGradient mu_head;
  MlpGradient logvar_head;
  Vector population_logvar;

  Vector flatten() const;
};

/// L_s + lambda L_g + gamma L_rs + delta L_rg over a batch (columns of
/// inputs / targets), using the log-variance reparameterization.
double student_loss(const StudentNetwork& net, const Matrix& inputs, const Matrix& targets,
                    const Vector& mu_g, const Vector& l_g, const StudentLossWeights& w,
                    const DropoutPlan& plan = {});

double student_loss_gradient(const StudentNetwork& net, const Matrix& inputs,
                             const Matrix& targets, const Vector& mu_g, const Vector& l_g,
                             const StudentLossWeights& w, const DropoutPlan& plan,
                             StudentGradient& grad);

/// Flat parameter vector: trunk, mu head, log-variance head.
Vector student_parameters(const StudentNetwork& net);
void set_student_parameters(StudentNetwork& net, const Vector& flat);

/// How each record's training target is chosen.
enum class TargetPairing {
  Self,             // the teacher output of the record itself
  ClassResampled,   // teacher output of a random record of the same class
};

std::string_view to_string(TargetPairing p) noexcept;
TargetPairing parse_pairing(std::string_view text);

struct StudentConfig {
  TrainConfig train{1e-3, 64, 100, 0.0, OptimizerKind::Adam, LrSchedule::Cosine, 0.9, 0};
  StudentLossWeights weights;
  StudentArchitecture arch;
  TargetPairing pairing = TargetPairing::Self;
  double validation_fraction = 0.1;
};

struct StudentModel {
  StudentNetwork net;
  Vector mu_g;  // frozen empirical target mean
  Vector l_g;   // learned population log variances
  /// Mean per-sample validation loss (L_s only, dropout off); entry 0 is init.
  std::vector<double> validation_loss;

  GaussianModel population() const;
};

/// inputs: teacher embeddings; targets: teacher low-dimensional outputs,
/// one column per record.
StudentModel train_student(const EmbeddingSet& inputs, const Matrix& targets,
                           const StudentConfig& cfg);

struct UncertaintyEstimate {
  Vector mu_hat;
  Matrix sigma_hat;   // epistemic + aleatoric
  Matrix epistemic;   // (1/T) sum (mu_t - mu_hat)(mu_t - mu_hat)^T
  Matrix aleatoric;   // (1/T) sum diag(exp(l_t))
  int passes = 0;
};

inline constexpr int kDefaultMcPasses = 1000;

/// Pass t uses the dropout draw derived from (base_seed, t), shared by every
/// input, so a batch call equals per-input calls with the same base seed.
/// `threads` <= 0 reads REPCAP_THREADS (default 1).
std::vector<UncertaintyEstimate> mc_infer(const StudentNetwork& net, const Matrix& inputs,
                                          int passes, std::uint64_t base_seed,
                                          int threads = 0);
UncertaintyEstimate mc_infer(const StudentNetwork& net, const Vector& x,
                             int passes = kDefaultMcPasses, std::uint64_t base_seed = 0);

/// REPCAP_THREADS, clamped to >= 1.
int configured_threads();

}  // namespace repcap
