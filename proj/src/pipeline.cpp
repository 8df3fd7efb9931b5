#include "repcap/pipeline.hpp"

#include "repcap/error.hpp"
#include "repcap/format.hpp"
#include "repcap/io.hpp"
#include "repcap/random.hpp"

#include <algorithm>
#include <cmath>

namespace repcap {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ProjectionMode m) noexcept {
  switch (m) {
    case ProjectionMode::Mlp: return "mlp";
    case ProjectionMode::Pca: return "pca";
    case ProjectionMode::Skip: return "skip";
  }
  return "mlp";
}

ProjectionMode parse_projection_mode(std::string_view text) {
  if (text == "mlp") return ProjectionMode::Mlp;
  if (text == "pca") return ProjectionMode::Pca;
  if (text == "skip") return ProjectionMode::Skip;
  throw Error(ErrorCode::InvalidArgument, "unknown projection mode '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  if (input.empty() == synth.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --input or --synth");
  }
  if (!synth.empty() && synth != "default" && synth != "isotropic") {
    throw Error(ErrorCode::InvalidArgument, "--synth must be 'default' or 'isotropic'");
  }
  if (projection != ProjectionMode::Skip && proj_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "--proj-dim must be positive");
  }
  if (mc_passes < 1) throw Error(ErrorCode::InvalidArgument, "--mc-passes must be >= 1");
  if (fars.empty()) throw Error(ErrorCode::InvalidArgument, "empty FAR list");
  for (double q : fars) {
    if (!(q > 0 && q < 1)) {
      throw Error(ErrorCode::InvalidProbability, "FAR " + format_number(q) + " outside (0, 1)");
    }
  }
  if (!(population_fraction > 0 && population_fraction < 1)) {
    throw Error(ErrorCode::InvalidProbability, "population fraction outside (0, 1)");
  }
  if (min_samples < 1) throw Error(ErrorCode::InvalidArgument, "--min-samples must be >= 1");
  if (projection == ProjectionMode::Mlp) repcap::validate(projector.train);
  repcap::validate(student.train);
  const auto& w = student.weights;
  if (w.lambda < 0 || w.gamma < 0 || w.delta < 0) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be nonnegative");
  }
  if (!(student.arch.dropout >= 0 && student.arch.dropout < 1)) {
    throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
  }
}

StageSeeds stage_seeds(std::uint64_t seed) {
  return {seed, derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3)};
}

// ------------------------------------------------------------------ json

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::Format, "expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::Format, "ragged matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

namespace {

ordered_json vector_to_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Format, "expected a vector");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

ordered_json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"epochs", t.epochs},               {"reg_lambda", t.reg_lambda},
          {"optimizer", to_string(t.optimizer)}, {"schedule", to_string(t.schedule)},
          {"momentum", t.momentum},           {"seed", t.seed}};
}

// JSON has no infinities; saturated values are written as null.
ordered_json finite_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(); }

}  // namespace

ordered_json to_json(const RunConfig& c) {
  const StageSeeds s = stage_seeds(c.seed);
  ordered_json j;
  j["input"] = c.input;
  j["synth"] = c.synth;
  j["synth_classes"] = c.synth_classes;
  j["synth_samples"] = c.synth_samples;
  j["synth_latent_dim"] = c.synth_latent_dim;
  j["synth_ambient_dim"] = c.synth_ambient_dim;
  j["projection"] = to_string(c.projection);
  j["proj_dim"] = c.proj_dim;
  j["projector"] = {{"train", train_to_json(c.projector.train)},
                    {"width", c.projector.width},
                    {"residual_blocks", c.projector.residual_blocks},
                    {"distance", to_string(c.projector.distance)},
                    {"validation_fraction", c.projector.validation_fraction}};
  j["student"] = {{"train", train_to_json(c.student.train)},
                  {"lambda", c.student.weights.lambda},
                  {"gamma", c.student.weights.gamma},
                  {"delta", c.student.weights.delta},
                  {"width", c.student.arch.width},
                  {"depth", c.student.arch.depth},
                  {"dropout", c.student.arch.dropout},
                  {"initial_log_variance", c.student.arch.initial_log_variance},
                  {"pairing", to_string(c.student.pairing)},
                  {"validation_fraction", c.student.validation_fraction}};
  j["mc_passes"] = c.mc_passes;
  j["far"] = c.fars;
  j["population_fraction"] = c.population_fraction;
  j["shannon_pairing"] = c.shannon_pairing;
  j["selector"] = to_string(c.selector);
  j["param"] = to_string(c.param);
  j["min_samples"] = c.min_samples;
  j["class_covariance"] = to_string(c.class_covariance);
  j["seed"] = c.seed;
  j["stage_seeds"] = {{"synth", s.synth},
                      {"projector", s.projector},
                      {"student", s.student},
                      {"inference", s.inference}};
  return j;
}

ordered_json to_json(const CapacityReport& r) {
  return {{"far", r.far},
          {"population_fraction", r.population_fraction},
          {"r_y", r.r_y},
          {"r_z", r.r_z},
          {"d", r.d},
          {"log_capacity", finite_or_null(r.log_capacity)},
          {"log10_capacity", finite_or_null(r.log10_capacity)},
          {"capacity", finite_or_null(r.capacity)},
          {"saturated", r.saturated},
          {"parameterization", to_string(r.parameterization)},
          {"selector", to_string(r.selector)},
          {"canonical_class_id", r.canonical_class_id}};
}

ordered_json to_json(const ClassStatistics& c) {
  return {{"class_id", c.class_id},
          {"n_samples", c.n_samples},
          {"mu", vector_to_json(c.mu_c)},
          {"sigma", matrix_to_json(c.sigma_c_avg)}};
}

ClassStatistics class_statistics_from_json(const json& j) {
  try {
    return make_class_statistics(j.at("class_id").get<std::string>(), j.at("n_samples").get<int>(),
                                 vector_from_json(j.at("mu")), matrix_from_json(j.at("sigma")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("class statistics: ") + e.what());
  }
}

// --------------------------------------------------------------- synthetic

SyntheticTeacherSpec synth_spec(const RunConfig& cfg) {
  const std::uint64_t seed = stage_seeds(cfg.seed).synth;
  SyntheticTeacherSpec spec =
      cfg.synth == "isotropic"
          ? SyntheticTeacherSpec::isotropic(seed, cfg.synth_latent_dim, cfg.synth_ambient_dim)
          : SyntheticTeacherSpec::defaults(seed, cfg.synth_latent_dim, cfg.synth_ambient_dim);
  spec.n_classes = cfg.synth_classes;
  spec.samples_per_class = cfg.synth_samples;
  return spec;
}

ordered_json truth_to_json(const TeacherGroundTruth& t) {
  ordered_json classes = ordered_json::array();
  for (std::size_t c = 0; c < t.class_ids.size(); ++c) {
    classes.push_back({{"class_id", t.class_ids[c]},
                       {"center", vector_to_json(t.centers[c])},
                       {"covariance", matrix_to_json(t.class_covs[c])}});
  }
  return {{"latent_dim", t.between_class_cov.rows()},
          {"between_class_cov", matrix_to_json(t.between_class_cov)},
          {"classes", std::move(classes)}};
}

TeacherGroundTruth truth_from_json(const json& j) {
  try {
    TeacherGroundTruth t;
    t.between_class_cov = matrix_from_json(j.at("between_class_cov"));
    for (const auto& c : j.at("classes")) {
      t.class_ids.push_back(c.at("class_id").get<std::string>());
      t.centers.push_back(vector_from_json(c.at("center")));
      t.class_covs.push_back(matrix_from_json(c.at("covariance")));
      if (t.centers.back().size() != t.between_class_cov.rows() ||
          t.class_covs.back().rows() != t.between_class_cov.rows()) {
        throw Error(ErrorCode::Format, "class " + t.class_ids.back() + " has the wrong dimension");
      }
    }
    if (t.class_ids.size() < 2) throw Error(ErrorCode::Format, "ground truth needs 2 classes");
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("ground truth: ") + e.what());
  }
}

// ---------------------------------------------------------------- stages

Matrix Teacher::apply(const Matrix& embeddings) const {
  switch (mode) {
    case ProjectionMode::Mlp: return project(mlp, embeddings);
    case ProjectionMode::Pca: return pca.project(embeddings);
    case ProjectionMode::Skip: return embeddings;
  }
  return embeddings;
}

int Teacher::output_dim(int input_dim) const {
  switch (mode) {
    case ProjectionMode::Mlp: return mlp.output_dim();
    case ProjectionMode::Pca: return pca.output_dim();
    case ProjectionMode::Skip: return input_dim;
  }
  return input_dim;
}

PipelineInput load_input(const RunConfig& cfg) {
  PipelineInput in;
  if (!cfg.input.empty()) {
    in.data = read_embeddings(cfg.input);
    return in;
  }
  SyntheticTeacher t = generate_synthetic_teacher(synth_spec(cfg));
  in.data = std::move(t.embeddings);
  in.truth = std::move(t.truth);
  return in;
}

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + " stage: " + e.detail());
  }
}

}  // namespace

Teacher train_teacher(const EmbeddingSet& data, const RunConfig& cfg, std::vector<double>* loss) {
  Teacher t;
  t.mode = cfg.projection;
  if (cfg.projection == ProjectionMode::Mlp) {
    ProjectorConfig pc = cfg.projector;
    pc.train.seed = stage_seeds(cfg.seed).projector;
    ProjectorTraining trained = train_projection(data, cfg.proj_dim, pc);
    t.mlp = std::move(trained.net);
    if (loss) *loss = std::move(trained.validation_loss);
  } else if (cfg.projection == ProjectionMode::Pca) {
    t.pca = fit_pca(data, cfg.proj_dim);
  }
  return t;
}

std::vector<CapacityReport> capacity_from_classes(const std::vector<ClassStatistics>& classes,
                                                  const RunConfig& cfg, Selector selector,
                                                  Parameterization param) {
  const ClassStatistics& canonical = select_canonical_class(classes, selector);
  const PopulationStatistics pop = population_statistics(classes, canonical);
  std::vector<double> fars = cfg.fars;
  std::sort(fars.begin(), fars.end());
  fars.erase(std::unique(fars.begin(), fars.end()), fars.end());
  return capacity_sweep(pop, canonical, fars, cfg.population_fraction, param,
                        cfg.shannon_pairing, selector);
}

PipelineRun run_pipeline(const EmbeddingSet& data, const RunConfig& cfg) {
  cfg.validate();
  const StageSeeds seeds = stage_seeds(cfg.seed);
  PipelineRun run;

  run.teacher = in_stage("projection", [&] { return train_teacher(data, cfg, &run.projector_loss); });
  run.targets = in_stage("projection", [&] { return run.teacher.apply(data.matrix()); });

  StudentConfig sc = cfg.student;
  sc.train.seed = seeds.student;
  run.student = in_stage("student", [&] { return train_student(data, run.targets, sc); });

  run.estimates = in_stage("inference", [&] {
    return mc_infer(run.student.net, data.matrix(), cfg.mc_passes, seeds.inference);
  });
  run.classes = in_stage("statistics", [&] {
    return class_statistics(data.labels(), run.estimates, cfg.min_samples, cfg.class_covariance);
  });
  run.reports = in_stage("capacity", [&] {
    return capacity_from_classes(run.classes.classes, cfg, cfg.selector, cfg.param);
  });
  return run;
}

std::vector<CapacityReport> oracle_reports(const TeacherGroundTruth& truth, const RunConfig& cfg) {
  std::vector<double> fars = cfg.fars;
  std::sort(fars.begin(), fars.end());
  fars.erase(std::unique(fars.begin(), fars.end()), fars.end());
  std::vector<CapacityReport> out;
  for (double q : fars) {
    CapacityQuery query;
    query.far = q;
    query.population_fraction = cfg.population_fraction;
    query.shannon_pairing = cfg.shannon_pairing;
    query.parameterization = cfg.param;
    query.selector = cfg.selector;
    out.push_back(oracle_capacity(truth, query));
  }
  return out;
}

ordered_json report_json(const RunConfig& cfg, const PipelineRun& run,
                         const std::vector<CapacityReport>* oracle) {
  ordered_json j;
  j["config"] = to_json(cfg);
  ordered_json stages;
  if (!run.projector_loss.empty()) {
    stages["projector"] = {{"initial_validation_loss", run.projector_loss.front()},
                           {"final_validation_loss", run.projector_loss.back()},
                           {"epochs", run.projector_loss.size() - 1}};
  } else {
    stages["projector"] = {{"mode", to_string(run.teacher.mode)}};
  }
  if (!run.student.validation_loss.empty()) {
    stages["student"] = {{"initial_validation_loss", run.student.validation_loss.front()},
                         {"final_validation_loss", run.student.validation_loss.back()},
                         {"epochs", run.student.validation_loss.size() - 1},
                         {"mu_g", vector_to_json(run.student.mu_g)},
                         {"l_g", vector_to_json(run.student.l_g)}};
  }
  j["stages"] = std::move(stages);
  j["classes"] = {{"used", run.classes.classes.size()}, {"dropped", run.classes.dropped}};
  ordered_json rows = ordered_json::array();
  for (const auto& r : run.reports) rows.push_back(to_json(r));
  j["capacity"] = std::move(rows);
  if (oracle) {
    ordered_json o = ordered_json::array();
    for (const auto& r : *oracle) o.push_back(to_json(r));
    j["oracle"] = std::move(o);
  }
  return j;
}

std::string sweep_csv(const std::vector<CapacityReport>& rows) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& r : rows) out += to_csv_row(r) + '\n';
  return out;
}

}  // namespace repcap
