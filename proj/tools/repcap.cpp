// repcap: toy reproduction, synthetic data, oracle capacities, the full
// estimation pipeline, cached FAR sweeps and student-vs-teacher evaluation.
//
// Exit codes: 0 success, 2 usage / validation / I/O, 3 numeric failure.

#include "repcap/checkpoint.hpp"
#include "repcap/error.hpp"
#include "repcap/format.hpp"
#include "repcap/io.hpp"
#include "repcap/pipeline.hpp"
#include "repcap/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace repcap;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

const char* kStatisticsFile = "statistics.json";
const char* kTeacherFile = "teacher.ckpt";
const char* kStudentFile = "student.ckpt";

// Flag values that need post-processing after parsing.
struct CliState {
  RunConfig cfg;
  std::string selector = "max";
  std::string param = "full";
  std::string distance = "chordal";
  std::string pairing = "self";
  std::string class_covariance = "with-scatter";
  std::optional<int> epochs, proj_epochs, student_epochs;
  std::optional<double> lr, proj_lr, student_lr;
  bool pca = false;
  bool skip_projection = false;
};

std::string matrix_text(const Matrix& m) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += i ? ", [" : "[";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += format_number(m(i, j));
    }
    out += "]";
  }
  return out + "]";
}

void add_synth_flags(CLI::App* app, RunConfig& c) {
  app->add_option("--synth", c.synth, "Synthetic teacher: default or isotropic");
  app->add_option("--synth-classes", c.synth_classes, "Synthetic classes")->capture_default_str();
  app->add_option("--synth-samples", c.synth_samples, "Synthetic samples per class")
      ->capture_default_str();
  app->add_option("--latent-dim", c.synth_latent_dim, "Synthetic latent dimension")
      ->capture_default_str();
  app->add_option("--ambient-dim", c.synth_ambient_dim, "Synthetic ambient dimension")
      ->capture_default_str();
}

void add_capacity_flags(CLI::App* app, CliState& s) {
  RunConfig& c = s.cfg;
  app->add_option("--far", c.fars, "False accept rate (repeatable)")->capture_default_str();
  app->add_option("--population-fraction", c.population_fraction,
                  "Probability mass of the population ellipsoid")
      ->capture_default_str();
  app->add_flag("--shannon-pairing", c.shannon_pairing,
                "Force the population fraction to 1 - FAR so r_y = r_z");
  app->add_option("--selector", s.selector, "Canonical class: min, mean, median, max")
      ->capture_default_str();
  app->add_option("--param", s.param, "Covariance form: sphere, axis, full")->capture_default_str();
}

void add_run_flags(CLI::App* app, CliState& s) {
  RunConfig& c = s.cfg;
  app->add_option("--input", c.input, "Embedding CSV (label,f0,...)");
  add_synth_flags(app, c);
  app->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  app->add_option("--proj-dim", c.proj_dim, "Projected dimension")->capture_default_str();
  app->add_flag("--pca", s.pca, "Linear PCA projection instead of the trained projector");
  app->add_flag("--skip-projection", s.skip_projection, "Train the student on raw embeddings");
  app->add_option("--epochs", s.epochs, "Epochs for both networks");
  app->add_option("--proj-epochs", s.proj_epochs, "Projector epochs");
  app->add_option("--student-epochs", s.student_epochs, "Student epochs");
  app->add_option("--lr", s.lr, "Learning rate for both networks");
  app->add_option("--proj-lr", s.proj_lr, "Projector learning rate");
  app->add_option("--student-lr", s.student_lr, "Student learning rate");
  app->add_option("--batch-size", c.student.train.batch_size, "Student batch size")
      ->capture_default_str();
  app->add_option("--proj-batch-size", c.projector.train.batch_size, "Projector pairs per batch")
      ->capture_default_str();
  app->add_option("--proj-width", c.projector.width, "Projector width")->capture_default_str();
  app->add_option("--proj-blocks", c.projector.residual_blocks, "Projector residual blocks")
      ->capture_default_str();
  app->add_option("--distance", s.distance, "Target distance: chordal, one-minus-cos, one-plus-cos")
      ->capture_default_str();
  app->add_option("--student-width", c.student.arch.width, "Student width")->capture_default_str();
  app->add_option("--student-depth", c.student.arch.depth, "Student trunk layers")
      ->capture_default_str();
  app->add_option("--dropout", c.student.arch.dropout, "Student dropout rate")
      ->capture_default_str();
  app->add_option("--lambda", c.student.weights.lambda, "Population likelihood weight")
      ->capture_default_str();
  app->add_option("--gamma", c.student.weights.gamma, "Aleatoric variance regularizer")
      ->capture_default_str();
  app->add_option("--delta", c.student.weights.delta, "Population variance regularizer")
      ->capture_default_str();
  app->add_option("--pairing", s.pairing, "Student targets: self or class-resampled")
      ->capture_default_str();
  app->add_option("--mc-passes", c.mc_passes, "Monte-Carlo dropout passes")->capture_default_str();
  add_capacity_flags(app, s);
  app->add_option("--min-samples", c.min_samples, "Drop classes with fewer records")
      ->capture_default_str();
  app->add_option("--class-covariance", s.class_covariance,
                  "Class covariance: uncertainty or with-scatter")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Run seed")->capture_default_str();
}

// Turns the string-valued flags into enums and applies the shared overrides.
void resolve(CliState& s) {
  RunConfig& c = s.cfg;
  c.selector = parse_selector(s.selector);
  c.param = parse_parameterization(s.param);
  c.projector.distance = parse_distance(s.distance);
  c.student.pairing = parse_pairing(s.pairing);
  c.class_covariance = parse_class_covariance(s.class_covariance);
  if (s.pca && s.skip_projection) {
    throw Error(ErrorCode::InvalidArgument, "--pca and --skip-projection are exclusive");
  }
  c.projection = s.pca ? ProjectionMode::Pca
                       : (s.skip_projection ? ProjectionMode::Skip : ProjectionMode::Mlp);
  if (s.epochs) c.projector.train.epochs = c.student.train.epochs = *s.epochs;
  if (s.proj_epochs) c.projector.train.epochs = *s.proj_epochs;
  if (s.student_epochs) c.student.train.epochs = *s.student_epochs;
  if (s.lr) c.projector.train.learning_rate = c.student.train.learning_rate = *s.lr;
  if (s.proj_lr) c.projector.train.learning_rate = *s.proj_lr;
  if (s.student_lr) c.student.train.learning_rate = *s.student_lr;
}

std::string toml_string(std::string_view v) {
  return ordered_json(std::string(v)).dump();
}

// The fully resolved run as a file accepted by --config.
std::string config_toml(const RunConfig& c) {
  std::ostringstream o;
  o << "[pipeline]\n";
  auto num = [&](const char* key, double v) { o << key << "=" << format_number(v) << "\n"; };
  auto str = [&](const char* key, std::string_view v) { o << key << "=" << toml_string(v) << "\n"; };
  auto flag = [&](const char* key, bool v) { o << key << "=" << (v ? "true" : "false") << "\n"; };
  if (!c.input.empty()) str("input", c.input);
  if (!c.synth.empty()) str("synth", c.synth);
  o << "synth-classes=" << c.synth_classes << "\nsynth-samples=" << c.synth_samples
    << "\nlatent-dim=" << c.synth_latent_dim << "\nambient-dim=" << c.synth_ambient_dim << "\n";
  str("out-dir", c.out_dir);
  o << "proj-dim=" << c.proj_dim << "\n";
  flag("pca", c.projection == ProjectionMode::Pca);
  flag("skip-projection", c.projection == ProjectionMode::Skip);
  o << "proj-epochs=" << c.projector.train.epochs << "\nstudent-epochs=" << c.student.train.epochs
    << "\n";
  num("proj-lr", c.projector.train.learning_rate);
  num("student-lr", c.student.train.learning_rate);
  o << "batch-size=" << c.student.train.batch_size
    << "\nproj-batch-size=" << c.projector.train.batch_size << "\nproj-width=" << c.projector.width
    << "\nproj-blocks=" << c.projector.residual_blocks << "\n";
  str("distance", to_string(c.projector.distance));
  o << "student-width=" << c.student.arch.width << "\nstudent-depth=" << c.student.arch.depth
    << "\n";
  num("dropout", c.student.arch.dropout);
  num("lambda", c.student.weights.lambda);
  num("gamma", c.student.weights.gamma);
  num("delta", c.student.weights.delta);
  str("pairing", to_string(c.student.pairing));
  o << "mc-passes=" << c.mc_passes << "\nfar=[";
  for (std::size_t i = 0; i < c.fars.size(); ++i) o << (i ? ", " : "") << format_number(c.fars[i]);
  o << "]\n";
  num("population-fraction", c.population_fraction);
  flag("shannon-pairing", c.shannon_pairing);
  str("selector", to_string(c.selector));
  str("param", to_string(c.param));
  o << "min-samples=" << c.min_samples << "\n";
  str("class-covariance", to_string(c.class_covariance));
  o << "seed=" << c.seed << "\n";
  return o.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

// ------------------------------------------------------------------ toy

int cmd_toy(const ToySpec& spec) {
  spec.validate();
  const ToyResult r = toy_capacity_experiment(spec);
  std::cout << "seed " << spec.seed << "\n"
            << "classes " << spec.n_classes << "\n"
            << "samples_per_class " << spec.samples_per_class << "\n"
            << "estimated_capacity " << format_number(r.estimated_capacity) << "\n"
            << "ground_truth_capacity " << format_number(r.ground_truth_capacity) << "\n"
            << "hull_capacity " << format_number(r.hull_capacity) << "\n"
            << "population_cov_true " << matrix_text(spec.population_cov) << "\n"
            << "class_cov_true " << matrix_text(spec.class_cov_template) << "\n"
            << "population_cov_estimated " << matrix_text(r.estimated_population_cov) << "\n"
            << "class_cov_estimated " << matrix_text(r.estimated_class_cov) << "\n"
            << "estimated_class " << r.estimated_class_id << "\n"
            << "population_hull_area " << format_number(r.population_hull_area) << "\n"
            << "class_hull_area " << format_number(r.class_hull_area) << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

int cmd_synth(RunConfig cfg, const std::string& output) {
  if (cfg.synth.empty()) cfg.synth = "default";
  if (cfg.synth != "default" && cfg.synth != "isotropic") {
    throw Error(ErrorCode::InvalidArgument, "--synth must be 'default' or 'isotropic'");
  }
  const SyntheticTeacher t = generate_synthetic_teacher(synth_spec(cfg));
  const fs::path out(output);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_embeddings(out, t.embeddings);
  fs::path truth = out;
  truth.replace_extension(".truth.json");
  ordered_json j = truth_to_json(t.truth);
  j["seed"] = cfg.seed;
  write_json(truth, j);
  std::cout << "wrote " << out.string() << " (" << t.embeddings.size() << " records, dim "
            << t.embeddings.dim() << ")\nwrote " << truth.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- oracle

int cmd_oracle(RunConfig cfg, const std::string& truth_path) {
  TeacherGroundTruth truth;
  if (!truth_path.empty()) {
    truth = truth_from_json(read_json(truth_path));
  } else {
    if (cfg.synth.empty()) cfg.synth = "default";
    truth = generate_synthetic_teacher(synth_spec(cfg)).truth;
  }
  std::cout << kSweepCsvHeader << "\n";
  for (const auto& r : oracle_reports(truth, cfg)) std::cout << to_csv_row(r) << "\n";
  return 0;
}

// ------------------------------------------------------------- pipeline

int cmd_pipeline(const RunConfig& cfg) {
  cfg.validate();
  PipelineInput in = load_input(cfg);
  const PipelineRun run = run_pipeline(in.data, cfg);

  const fs::path dir(cfg.out_dir);
  ensure_dir(dir);
  if (run.teacher.mode == ProjectionMode::Mlp) save_projector(dir / kTeacherFile, run.teacher.mlp);
  if (run.teacher.mode == ProjectionMode::Pca) save_linear(dir / kTeacherFile, run.teacher.pca);
  save_student(dir / kStudentFile, run.student);

  ordered_json stats;
  stats["config"] = to_json(cfg);
  ordered_json classes = ordered_json::array();
  for (const auto& c : run.classes.classes) classes.push_back(to_json(c));
  stats["classes"] = std::move(classes);
  stats["dropped"] = run.classes.dropped;
  write_json(dir / kStatisticsFile, stats);

  std::vector<CapacityReport> oracle;
  if (in.truth) {
    oracle = oracle_reports(*in.truth, cfg);
    write_json(dir / "truth.json", truth_to_json(*in.truth));
  }
  write_json(dir / "report.json", report_json(cfg, run, in.truth ? &oracle : nullptr));
  write_text_file(dir / "sweep.csv", sweep_csv(run.reports));
  write_text_file(dir / "config.toml", config_toml(cfg));

  for (std::size_t i = 0; i < run.reports.size(); ++i) {
    const auto& r = run.reports[i];
    std::cout << "far " << format_number(r.far) << " log10_capacity "
              << format_number(r.log10_capacity);
    if (in.truth) std::cout << " oracle " << format_number(oracle[i].log10_capacity);
    std::cout << "\n";
  }
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
  std::string dir = "repcap_out";
  std::vector<double> fars;
  std::optional<double> fraction;
  bool shannon = false;
  std::string selector = "all";
  std::string param = "all";
  std::string output;
};

int cmd_sweep(const SweepOptions& o) {
  const fs::path cache = fs::path(o.dir) / kStatisticsFile;
  if (!fs::exists(cache)) {
    throw Error(ErrorCode::Io, "no cached statistics at " + cache.string() +
                                   "; run `repcap pipeline --out-dir " + o.dir + "` first");
  }
  const json j = read_json(cache);
  std::vector<ClassStatistics> classes;
  RunConfig cfg;
  try {
    for (const auto& c : j.at("classes")) classes.push_back(class_statistics_from_json(c));
    const auto& jc = j.at("config");
    cfg.fars = jc.at("far").get<std::vector<double>>();
    cfg.population_fraction = jc.at("population_fraction").get<double>();
    cfg.shannon_pairing = jc.at("shannon_pairing").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, cache.string() + ": " + e.what());
  }
  if (!o.fars.empty()) cfg.fars = o.fars;
  if (o.fraction) cfg.population_fraction = *o.fraction;
  if (o.shannon) cfg.shannon_pairing = true;

  std::vector<Parameterization> params;
  if (o.param == "all") {
    params = {Parameterization::Isotropic, Parameterization::AxisAligned,
              Parameterization::FullEllipsoid};
  } else {
    params = {parse_parameterization(o.param)};
  }
  std::vector<Selector> selectors;
  if (o.selector == "all") {
    selectors = {Selector::Min, Selector::Mean, Selector::Median, Selector::Max};
  } else {
    selectors = {parse_selector(o.selector)};
  }

  std::vector<CapacityReport> rows;
  for (Parameterization p : params) {
    for (Selector s : selectors) {
      auto part = capacity_from_classes(classes, cfg, s, p);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  // Stable: within a FAR the curve order above is kept.
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CapacityReport& a, const CapacityReport& b) { return a.far < b.far; });
  const std::string csv = sweep_csv(rows);
  if (o.output.empty()) {
    std::cout << csv;
  } else {
    write_text_file(o.output, csv);
  }
  return 0;
}

// ----------------------------------------------------------------- eval

struct EvalOptions {
  std::string teacher;
  std::string student;
  std::size_t pairs = 10000;
  std::vector<double> far_grid{1e-3, 1e-2, 1e-1};
  int mc_passes = 100;
};

// Maps embeddings through a checkpoint of any role. Student checkpoints
// contribute their Monte-Carlo mean.
Matrix apply_checkpoint(const fs::path& path, const Matrix& x, int passes, std::uint64_t seed) {
  switch (checkpoint_role(path)) {
    case CheckpointRole::Projector: return project(load_projector(path), x);
    case CheckpointRole::Linear: return load_linear(path).project(x);
    case CheckpointRole::Student: {
      const StudentModel model = load_student(path);
      if (model.net.input_dim() != x.rows()) {
        throw Error(ErrorCode::Format, path.string() + " expects dimension " +
                                           std::to_string(model.net.input_dim()));
      }
      const auto est = mc_infer(model.net, x, passes, seed);
      Matrix mu(model.net.output_dim(), x.cols());
      for (Eigen::Index i = 0; i < x.cols(); ++i) mu.col(i) = est[static_cast<std::size_t>(i)].mu_hat;
      return mu;
    }
  }
  throw Error(ErrorCode::Format, path.string() + ": unknown role");
}

int cmd_eval(RunConfig cfg, EvalOptions o) {
  if (cfg.input.empty() && cfg.synth.empty()) cfg.synth = "default";
  if (!cfg.input.empty() && !cfg.synth.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --input or --synth");
  }
  if (o.far_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty FAR grid");
  if (o.mc_passes < 1) throw Error(ErrorCode::InvalidArgument, "--mc-passes must be >= 1");
  const fs::path dir(cfg.out_dir);
  if (o.student.empty()) o.student = (dir / kStudentFile).string();
  if (o.teacher.empty() && fs::exists(dir / kTeacherFile)) o.teacher = (dir / kTeacherFile).string();

  const EmbeddingSet data = load_input(cfg).data;
  const std::uint64_t seed = stage_seeds(cfg.seed).inference;
  const Matrix teacher =
      o.teacher.empty() ? data.matrix() : apply_checkpoint(o.teacher, data.matrix(), o.mc_passes, seed);
  const Matrix student = apply_checkpoint(o.student, data.matrix(), o.mc_passes, seed);
  if (teacher.rows() != student.rows()) {
    throw Error(ErrorCode::Format, "teacher and student output dimensions differ (" +
                                       std::to_string(teacher.rows()) + " vs " +
                                       std::to_string(student.rows()) + ")");
  }

  const VerificationPairs pairs = sample_verification_pairs(data.labels(), o.pairs, cfg.seed);
  const auto tg = pair_distances(teacher, pairs.genuine);
  const auto ti = pair_distances(teacher, pairs.impostor);
  const auto sg = pair_distances(student, pairs.genuine);
  const auto si = pair_distances(student, pairs.impostor);
  std::sort(o.far_grid.begin(), o.far_grid.end());
  const auto roc_t = roc_at_far(tg, ti, o.far_grid);
  const auto roc_s = roc_at_far(sg, si, o.far_grid);

  std::vector<double> all_t = tg, all_s = sg;
  all_t.insert(all_t.end(), ti.begin(), ti.end());
  all_s.insert(all_s.end(), si.begin(), si.end());
  const double rho = spearman(all_t, all_s);

  std::string csv = "far,tar_teacher,tar_student,threshold_teacher,threshold_student\n";
  for (std::size_t i = 0; i < roc_t.size(); ++i) {
    csv += format_number(roc_t[i].far) + "," + format_number(roc_t[i].tar) + "," +
           format_number(roc_s[i].tar) + "," + format_number(roc_t[i].threshold) + "," +
           format_number(roc_s[i].threshold) + "\n";
  }
  ensure_dir(dir);
  write_text_file(dir / "eval_roc.csv", csv);
  ordered_json j;
  j["config"] = to_json(cfg);
  j["teacher"] = o.teacher.empty() ? "identity" : o.teacher;
  j["student"] = o.student;
  j["pairs"] = o.pairs;
  j["mc_passes"] = o.mc_passes;
  j["spearman"] = rho;
  write_json(dir / "eval.json", j);
  std::cout << csv << "spearman " << format_number(rho) << "\n";
  return 0;
}

int exit_code(const Error& e) { return is_numeric_failure(e.code()) ? kExitNumeric : kExitUsage; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity capacity estimation for embedding representations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "",
                 "TOML file; pipeline flags go under [pipeline], command-line flags win");

  ToySpec toy;
  auto* toy_cmd = app.add_subcommand("toy", "Two-dimensional toy experiment");
  toy_cmd->add_option("--classes", toy.n_classes, "Classes")->capture_default_str();
  toy_cmd->add_option("--samples", toy.samples_per_class, "Samples per class")->capture_default_str();
  toy_cmd->add_option("--jitter-low", toy.jitter_low, "Lower class scale factor")->capture_default_str();
  toy_cmd->add_option("--jitter-high", toy.jitter_high, "Upper class scale factor")
      ->capture_default_str();
  toy_cmd->add_option("--seed", toy.seed, "Seed")->capture_default_str();

  RunConfig synth_cfg;
  synth_cfg.synth = "default";
  std::string synth_out = "synth.csv";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic teacher embedding set");
  add_synth_flags(synth_cmd, synth_cfg);
  synth_cmd->add_option("--seed", synth_cfg.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("-o,--output", synth_out, "Embedding CSV; truth goes next to it")
      ->capture_default_str();

  CliState oracle_state;
  std::string truth_path;
  auto* oracle_cmd = app.add_subcommand("oracle", "Capacity from the true latent covariances");
  add_synth_flags(oracle_cmd, oracle_state.cfg);
  oracle_cmd->add_option("--truth", truth_path, "Ground-truth JSON from `synth` or `pipeline`");
  oracle_cmd->add_option("--seed", oracle_state.cfg.seed, "Seed")->capture_default_str();
  add_capacity_flags(oracle_cmd, oracle_state);

  CliState run_state;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Projector, student, statistics, capacity");
  add_run_flags(pipeline_cmd, run_state);

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Capacity curves from cached class statistics");
  sweep_cmd->add_option("--out-dir", sweep.dir, "Pipeline output directory")->capture_default_str();
  sweep_cmd->add_option("--far", sweep.fars, "FARs (default: the cached run's list)")
      ->expected(1, -1);
  sweep_cmd->add_option("--population-fraction", sweep.fraction, "Population fraction");
  sweep_cmd->add_flag("--shannon-pairing", sweep.shannon, "Force r_y = r_z");
  sweep_cmd->add_option("--selector", sweep.selector, "min, mean, median, max or all")
      ->capture_default_str();
  sweep_cmd->add_option("--param", sweep.param, "sphere, axis, full or all")->capture_default_str();
  sweep_cmd->add_option("-o,--output", sweep.output, "CSV path (default stdout)");

  RunConfig eval_cfg;
  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "ROC of teacher vs student scores");
  eval_cmd->add_option("--input", eval_cfg.input, "Embedding CSV");
  add_synth_flags(eval_cmd, eval_cfg);
  eval_cmd->add_option("--seed", eval_cfg.seed, "Seed for data and pairs")->capture_default_str();
  eval_cmd->add_option("--out-dir", eval_cfg.out_dir, "Directory with the checkpoints")
      ->capture_default_str();
  eval_cmd->add_option("--teacher", eval.teacher, "Teacher checkpoint (default out-dir)");
  eval_cmd->add_option("--student", eval.student, "Student checkpoint (default out-dir)");
  eval_cmd->add_option("--pairs", eval.pairs, "Genuine and impostor pairs each")
      ->capture_default_str();
  eval_cmd->add_option("--far", eval.far_grid, "FAR grid")->capture_default_str();
  eval_cmd->add_option("--mc-passes", eval.mc_passes, "Passes for the student mean")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (toy_cmd->parsed()) return cmd_toy(toy);
    if (synth_cmd->parsed()) return cmd_synth(synth_cfg, synth_out);
    if (oracle_cmd->parsed()) {
      resolve(oracle_state);
      return cmd_oracle(oracle_state.cfg, truth_path);
    }
    if (pipeline_cmd->parsed()) {
      resolve(run_state);
      return cmd_pipeline(run_state.cfg);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(sweep);
    if (eval_cmd->parsed()) return cmd_eval(eval_cfg, eval);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
