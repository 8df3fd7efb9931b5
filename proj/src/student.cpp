#include "repcap/student.hpp"

#include "repcap/error.hpp"
#include "repcap/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <thread>

namespace repcap {

namespace {

MlpNetwork make_head(int width, int out_dim, std::uint64_t seed, double weight_scale,
                     double bias) {
  MlpNetwork base(width, {{out_dim, false, false, 0.0}}, seed);
  std::vector<DenseLayer> layers = base.layers();
  layers.front().weight *= weight_scale;
  layers.front().bias.setConstant(bias);
  return MlpNetwork(std::move(layers), seed);
}

}  // namespace

StudentNetwork make_student(int input_dim, int out_dim, const StudentArchitecture& arch,
                            std::uint64_t seed) {
  if (arch.depth < 1 || arch.width < 1 || out_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "student needs depth, width and output >= 1");
  }
  std::vector<LayerSpec> trunk;
  trunk.push_back({arch.width, true, false, arch.dropout});
  for (int k = 1; k < arch.depth; ++k) trunk.push_back({arch.width, true, true, arch.dropout});
  return StudentNetwork{
      MlpNetwork(input_dim, trunk, derive_seed(seed, 1)),
      make_head(arch.width, out_dim, derive_seed(seed, 2), 1.0, 0.0),
      make_head(arch.width, out_dim, derive_seed(seed, 3), 0.01, arch.initial_log_variance),
  };
}

StudentOutput student_forward(const StudentNetwork& net, const Matrix& inputs,
                              const DropoutPlan& plan, StudentCache* cache) {
  const Matrix h = net.trunk.forward(inputs, plan, cache ? &cache->trunk : nullptr);
  return StudentOutput{net.mu_head.forward(h, {}, cache ? &cache->mu : nullptr),
                       net.logvar_head.forward(h, {}, cache ? &cache->logvar : nullptr)};
}

StudentOutput student_forward(const StudentNetwork& net, const Vector& x, StudentMode mode,
                              std::uint64_t seed) {
  const DropoutPlan plan{mode == StudentMode::Sample ? DropoutMode::Shared
                                                     : DropoutMode::Deterministic,
                         seed};
  return student_forward(net, Matrix(x), plan);
}

Vector StudentGradient::flatten() const {
  const Vector a = trunk.flatten();
  const Vector b = mu_head.flatten();
  const Vector c = logvar_head.flatten();
  Vector flat(a.size() + b.size() + c.size() + population_logvar.size());
  flat << a, b, c, population_logvar;
  return flat;
}

namespace {

struct LossTerms {
  double total = 0;
  Matrix d_mu;
  Matrix d_logvar;
  Vector d_lg;
};

void require_student_batch(const StudentNetwork& net, const Matrix& inputs, const Matrix& targets,
                           const Vector& mu_g, const Vector& l_g) {
  if (inputs.cols() == 0) throw Error(ErrorCode::InsufficientSamples, "empty batch");
  const auto m = net.output_dim();
  if (inputs.rows() != net.input_dim() || targets.cols() != inputs.cols() ||
      targets.rows() != m || mu_g.size() != m || l_g.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "student batch shapes are inconsistent");
  }
}

LossTerms evaluate_loss(const StudentOutput& out, const Matrix& targets, const Vector& mu_g,
                        const Vector& l_g, const StudentLossWeights& w, bool with_grad) {
  const double n = static_cast<double>(targets.cols());
  const Eigen::ArrayXXd r = (targets - out.mu).array();
  const Eigen::ArrayXXd inv_var = (-out.logvar.array()).exp();
  const Eigen::ArrayXXd var = out.logvar.array().exp();

  const double l_s = 0.5 * (out.logvar.array() + r.square() * inv_var).sum();
  const Eigen::ArrayXXd rg = (targets.colwise() - mu_g).array();
  const Eigen::ArrayXd inv_var_g = (-l_g.array()).exp();
  const double l_pop =
      0.5 * (n * l_g.sum() + (rg.square().colwise() * inv_var_g).sum());
  const double l_rs = var.sum() / (2.0 * n);
  const double l_rg = 0.5 * l_g.array().exp().sum();

  LossTerms t;
  t.total = l_s + w.lambda * l_pop + w.gamma * l_rs + w.delta * l_rg;
  if (with_grad) {
    t.d_mu = (-r * inv_var).matrix();
    t.d_logvar = (0.5 * (1.0 - r.square() * inv_var) + w.gamma * var / (2.0 * n)).matrix();
    t.d_lg = (w.lambda * 0.5 * (n - (rg.square().colwise() * inv_var_g).rowwise().sum()) +
              w.delta * 0.5 * l_g.array().exp())
                 .matrix();
  }
  return t;
}

}  // namespace

double student_loss(const StudentNetwork& net, const Matrix& inputs, const Matrix& targets,
                    const Vector& mu_g, const Vector& l_g, const StudentLossWeights& w,
                    const DropoutPlan& plan) {
  require_student_batch(net, inputs, targets, mu_g, l_g);
  return evaluate_loss(student_forward(net, inputs, plan), targets, mu_g, l_g, w, false).total;
}

double student_loss_gradient(const StudentNetwork& net, const Matrix& inputs,
                             const Matrix& targets, const Vector& mu_g, const Vector& l_g,
                             const StudentLossWeights& w, const DropoutPlan& plan,
                             StudentGradient& grad) {
  require_student_batch(net, inputs, targets, mu_g, l_g);
  StudentCache cache;
  const StudentOutput out = student_forward(net, inputs, plan, &cache);
  LossTerms t = evaluate_loss(out, targets, mu_g, l_g, w, true);

  grad.trunk = MlpGradient(net.trunk);
  grad.mu_head = MlpGradient(net.mu_head);
  grad.logvar_head = MlpGradient(net.logvar_head);
  Matrix dh_mu;
  Matrix dh_lv;
  net.mu_head.backward(cache.mu, t.d_mu, grad.mu_head, &dh_mu);
  net.logvar_head.backward(cache.logvar, t.d_logvar, grad.logvar_head, &dh_lv);
  net.trunk.backward(cache.trunk, dh_mu + dh_lv, grad.trunk);
  grad.population_logvar = std::move(t.d_lg);
  return t.total;
}

Vector student_parameters(const StudentNetwork& net) {
  const Vector a = net.trunk.parameters();
  const Vector b = net.mu_head.parameters();
  const Vector c = net.logvar_head.parameters();
  Vector flat(a.size() + b.size() + c.size());
  flat << a, b, c;
  return flat;
}

void set_student_parameters(StudentNetwork& net, const Vector& flat) {
  const auto na = net.trunk.parameter_count();
  const auto nb = net.mu_head.parameter_count();
  const auto nc = net.logvar_head.parameter_count();
  if (flat.size() != na + nb + nc) {
    throw Error(ErrorCode::DimensionMismatch, "student parameter vector has wrong length");
  }
  net.trunk.set_parameters(flat.segment(0, na));
  net.mu_head.set_parameters(flat.segment(na, nb));
  net.logvar_head.set_parameters(flat.segment(na + nb, nc));
}

std::string_view to_string(TargetPairing p) noexcept {
  return p == TargetPairing::Self ? "self" : "class-resampled";
}

TargetPairing parse_pairing(std::string_view text) {
  if (text == "self") return TargetPairing::Self;
  if (text == "class-resampled") return TargetPairing::ClassResampled;
  throw Error(ErrorCode::InvalidArgument, "unknown target pairing '" + std::string(text) + "'");
}

GaussianModel StudentModel::population() const {
  return GaussianModel(mu_g, Matrix(l_g.array().exp().matrix().asDiagonal()),
                       Parameterization::AxisAligned);
}

namespace {

Matrix gather(const Matrix& source, const std::vector<std::size_t>& cols) {
  Matrix out(source.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = source.col(static_cast<Eigen::Index>(cols[k]));
  }
  return out;
}

double mean_student_nll(const StudentNetwork& net, const Matrix& inputs, const Matrix& targets) {
  const StudentOutput out = student_forward(net, inputs, DropoutPlan{});
  const Eigen::ArrayXXd r = (targets - out.mu).array();
  const double l_s = 0.5 * (out.logvar.array() + r.square() * (-out.logvar.array()).exp()).sum();
  return l_s / static_cast<double>(inputs.cols());
}

// Per-row affine map x -> (x - shift) / scale; constant rows keep scale 1.
struct Standardizer {
  Vector shift;
  Vector scale;

  explicit Standardizer(const Matrix& data) {
    shift = data.rowwise().mean();
    scale.resize(data.rows());
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const double sd = std::sqrt((data.row(r).array() - shift[r]).square().mean());
      scale[r] = sd > 1e-12 * (1.0 + std::abs(shift[r])) ? sd : 1.0;
    }
  }
  Matrix apply(const Matrix& data) const {
    return ((data.colwise() - shift).array().colwise() / scale.array()).matrix();
  }
};

MlpNetwork rebuild(const MlpNetwork& net, std::vector<DenseLayer> layers) {
  return MlpNetwork(std::move(layers), net.seed(), net.negative_slope());
}

// Makes the trained network act on raw inputs and emit raw-unit outputs.
void fold_standardization(StudentModel& model, const Standardizer& in, const Standardizer& out) {
  auto trunk = model.net.trunk.layers();
  trunk.front().weight = trunk.front().weight * in.scale.cwiseInverse().asDiagonal();
  trunk.front().bias -= trunk.front().weight * in.shift;
  model.net.trunk = rebuild(model.net.trunk, std::move(trunk));

  auto mu = model.net.mu_head.layers();
  mu.back().weight = out.scale.asDiagonal() * mu.back().weight;
  mu.back().bias = out.scale.cwiseProduct(mu.back().bias) + out.shift;
  model.net.mu_head = rebuild(model.net.mu_head, std::move(mu));

  const Vector log_var_shift = 2.0 * out.scale.array().log().matrix();
  auto lv = model.net.logvar_head.layers();
  lv.back().bias += log_var_shift;
  model.net.logvar_head = rebuild(model.net.logvar_head, std::move(lv));

  model.mu_g = out.scale.cwiseProduct(model.mu_g) + out.shift;
  model.l_g += log_var_shift;
}

}  // namespace

StudentModel train_student(const EmbeddingSet& inputs, const Matrix& targets,
                           const StudentConfig& cfg) {
  validate(cfg.train);
  if (inputs.empty()) throw Error(ErrorCode::InsufficientSamples, "no training records");
  if (targets.cols() != static_cast<Eigen::Index>(inputs.size()) || targets.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "need one target column per input record");
  }
  const auto m = static_cast<int>(targets.rows());
  const std::size_t n = inputs.size();

  std::mt19937_64 rng(cfg.train.seed);
  // Training runs on per-dimension standardized inputs and targets; the
  // affine maps are folded back into the network at the end.
  const Standardizer in_std(inputs.matrix());
  const Standardizer out_std(targets);
  const Matrix x_all = in_std.apply(inputs.matrix());
  const Matrix y_all = out_std.apply(targets);

  StudentModel model{make_student(inputs.dim(), m, cfg.arch, derive_seed(cfg.train.seed, 7)),
                     y_all.rowwise().mean(), Vector(), {}};
  const Matrix centered = y_all.colwise() - model.mu_g;
  model.l_g = (centered.array().square().rowwise().mean().max(1e-12)).log().matrix();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val =
      static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val_records(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_records(order.begin() + n_val, order.end());
  if (val_records.size() < 2) val_records = train_records;
  std::sort(train_records.begin(), train_records.end());

  const Matrix val_inputs = gather(x_all, val_records);
  const Matrix val_targets = gather(y_all, val_records);
  model.validation_loss.push_back(mean_student_nll(model.net, val_inputs, val_targets));

  // Same-class training partners for resampled targets.
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i : train_records) members[inputs.label(i)].push_back(i);

  const auto batch = static_cast<std::size_t>(cfg.train.batch_size);
  const std::size_t batches_per_epoch = (train_records.size() + batch - 1) / batch;
  const long total_steps = static_cast<long>(batches_per_epoch) * cfg.train.epochs;

  Vector params(student_parameters(model.net).size() + m);
  params << student_parameters(model.net), model.l_g;
  const Eigen::Index n_net = params.size() - m;
  Optimizer opt(cfg.train.optimizer, params.size(), cfg.train.momentum);
  StudentGradient grad;
  long step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::shuffle(train_records.begin(), train_records.end(), rng);
    for (std::size_t first = 0; first < train_records.size(); first += batch) {
      const std::size_t count = std::min(batch, train_records.size() - first);
      std::vector<std::size_t> rows(train_records.begin() + static_cast<long>(first),
                                    train_records.begin() + static_cast<long>(first + count));
      std::vector<std::size_t> target_rows = rows;
      if (cfg.pairing == TargetPairing::ClassResampled) {
        for (auto& r : target_rows) {
          const auto& group = members[inputs.label(r)];
          std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
          r = group[pick(rng)];
        }
      }
      const Matrix x = gather(x_all, rows);
      const Matrix y = gather(y_all, target_rows);
      const DropoutPlan plan{DropoutMode::PerSample, derive_seed(cfg.train.seed, 1000 + step)};
      student_loss_gradient(model.net, x, y, model.mu_g, model.l_g, cfg.weights, plan, grad);
      // Per-sample scale so the step size does not depend on the batch size.
      opt.step(params, grad.flatten() / static_cast<double>(count),
               scheduled_rate(cfg.train, step++, total_steps));
      set_student_parameters(model.net, params.head(n_net));
      model.l_g = params.tail(m);
    }
    model.validation_loss.push_back(mean_student_nll(model.net, val_inputs, val_targets));
  }
  fold_standardization(model, in_std, out_std);
  return model;
}

int configured_threads() {
  const char* env = std::getenv("REPCAP_THREADS");
  if (!env) return 1;
  int value = 1;
  const auto* end = env + std::char_traits<char>::length(env);
  if (std::from_chars(env, end, value).ec != std::errc{} || value < 1) return 1;
  return value;
}

namespace {

constexpr int kMcChunk = 16;

// Running mean / scatter per input over a contiguous range of passes.
struct PassMoments {
  double count = 0;
  Matrix mean;                 // m x N
  std::vector<Matrix> scatter; // N of m x m
  Matrix aleatoric;            // m x N, running mean of exp(l)

  PassMoments(Eigen::Index m, Eigen::Index n)
      : mean(Matrix::Zero(m, n)),
        scatter(static_cast<std::size_t>(n), Matrix::Zero(m, m)),
        aleatoric(Matrix::Zero(m, n)) {}

  void add(const StudentOutput& out) {
    count += 1.0;
    const double w = (count - 1.0) / count;
    for (Eigen::Index i = 0; i < mean.cols(); ++i) {
      const Vector delta = out.mu.col(i) - mean.col(i);
      mean.col(i) += delta / count;
      scatter[static_cast<std::size_t>(i)].noalias() += w * (delta * delta.transpose());
      aleatoric.col(i) += (out.logvar.col(i).array().exp().matrix() - aleatoric.col(i)) / count;
    }
  }

  // Chan et al. pairwise combination; `other` covers the later passes.
  void merge(const PassMoments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double total = count + other.count;
    const double f = other.count / total;
    const double g = count * other.count / total;
    for (Eigen::Index i = 0; i < mean.cols(); ++i) {
      const Vector delta = other.mean.col(i) - mean.col(i);
      mean.col(i) += f * delta;
      scatter[static_cast<std::size_t>(i)] +=
          other.scatter[static_cast<std::size_t>(i)] + g * (delta * delta.transpose());
      aleatoric.col(i) += f * (other.aleatoric.col(i) - aleatoric.col(i));
    }
    count = total;
  }
};

}  // namespace

std::vector<UncertaintyEstimate> mc_infer(const StudentNetwork& net, const Matrix& inputs,
                                          int passes, std::uint64_t base_seed, int threads) {
  if (passes < 1) throw Error(ErrorCode::InvalidArgument, "need at least one MC pass");
  if (inputs.rows() != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(inputs.rows()) +
                                                  ", student expects " +
                                                  std::to_string(net.input_dim()));
  }
  if (threads <= 0) threads = configured_threads();
  const Eigen::Index m = net.output_dim();
  const Eigen::Index n = inputs.cols();

  auto run_chunk = [&](int chunk) {
    PassMoments part(m, n);
    const int begin = chunk * kMcChunk;
    const int end = std::min(passes, begin + kMcChunk);
    for (int t = begin; t < end; ++t) {
      const DropoutPlan plan{DropoutMode::Shared,
                             derive_seed(base_seed, static_cast<std::uint64_t>(t))};
      part.add(student_forward(net, inputs, plan));
    }
    return part;
  };

  const int n_chunks = (passes + kMcChunk - 1) / kMcChunk;
  PassMoments total(m, n);
  for (int wave = 0; wave < n_chunks; wave += threads) {
    const int in_wave = std::min(threads, n_chunks - wave);
    if (in_wave == 1) {
      total.merge(run_chunk(wave));
      continue;
    }
    std::vector<PassMoments> parts(static_cast<std::size_t>(in_wave), PassMoments(0, 0));
    {
      std::vector<std::jthread> workers;
      for (int k = 0; k < in_wave; ++k) {
        workers.emplace_back([&, k] { parts[static_cast<std::size_t>(k)] = run_chunk(wave + k); });
      }
    }
    for (const auto& part : parts) total.merge(part);
  }

  std::vector<UncertaintyEstimate> estimates;
  estimates.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    UncertaintyEstimate e;
    e.mu_hat = total.mean.col(i);
    const Matrix& scatter = total.scatter[static_cast<std::size_t>(i)];
    // Blocked products are not bitwise symmetric; restore exact symmetry.
    e.epistemic = (scatter + scatter.transpose()) / (2.0 * static_cast<double>(passes));
    e.aleatoric = total.aleatoric.col(i).asDiagonal();
    e.sigma_hat = e.epistemic + e.aleatoric;
    e.passes = passes;
    estimates.push_back(std::move(e));
  }
  return estimates;
}

UncertaintyEstimate mc_infer(const StudentNetwork& net, const Vector& x, int passes,
                             std::uint64_t base_seed) {
  return mc_infer(net, Matrix(x), passes, base_seed, 1).front();
}

}  // namespace repcap
