#pragma once

// End-to-end capacity estimation: unfold the teacher embeddings, train the
// dropout student on the projected targets, run Monte-Carlo inference,
// aggregate class and population statistics and evaluate the volume ratio
// over a FAR list. Each stage derives its own seed from the run seed.

#include "repcap/capacity.hpp"
#include "repcap/projection.hpp"
#include "repcap/student.hpp"
#include "repcap/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace repcap {

enum class ProjectionMode { Mlp, Pca, Skip };

std::string_view to_string(ProjectionMode m) noexcept;
ProjectionMode parse_projection_mode(std::string_view text);

struct RunConfig {
  std::string input;   // embedding CSV
  std::string synth;   // "default" or "isotropic" when no input file is given
  std::string out_dir = "repcap_out";
  int synth_classes = 100;
  int synth_samples = 50;
  int synth_latent_dim = 8;
  int synth_ambient_dim = 64;

  ProjectionMode projection = ProjectionMode::Mlp;
  int proj_dim = 8;
  ProjectorConfig projector;
  StudentConfig student;

  int mc_passes = kDefaultMcPasses;
  std::vector<double> fars{0.01};
  double population_fraction = kDefaultPopulationFraction;
  bool shannon_pairing = false;
  Selector selector = Selector::Max;
  Parameterization param = Parameterization::FullEllipsoid;
  int min_samples = kDefaultMinSamples;
  ClassCovariance class_covariance = ClassCovariance::WithMemberScatter;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Seeds handed to each stage, all derived from RunConfig::seed.
struct StageSeeds {
  std::uint64_t synth;
  std::uint64_t projector;
  std::uint64_t student;
  std::uint64_t inference;
};
StageSeeds stage_seeds(std::uint64_t seed);

nlohmann::ordered_json to_json(const RunConfig& cfg);
nlohmann::ordered_json to_json(const CapacityReport& r);
nlohmann::ordered_json to_json(const ClassStatistics& c);
ClassStatistics class_statistics_from_json(const nlohmann::json& j);
nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

SyntheticTeacherSpec synth_spec(const RunConfig& cfg);
nlohmann::ordered_json truth_to_json(const TeacherGroundTruth& t);
TeacherGroundTruth truth_from_json(const nlohmann::json& j);

/// Step 1 result: maps teacher embeddings to projector targets.
struct Teacher {
  ProjectionMode mode = ProjectionMode::Skip;
  MlpNetwork mlp;
  LinearProjector pca;

  Matrix apply(const Matrix& embeddings) const;
  int output_dim(int input_dim) const;
};

struct PipelineRun {
  Teacher teacher;
  std::vector<double> projector_loss;  // validation loss per epoch, entry 0 at init
  StudentModel student;
  Matrix targets;                      // teacher outputs, column per record
  std::vector<UncertaintyEstimate> estimates;
  ClassFilterResult classes;
  std::vector<CapacityReport> reports; // one per FAR
};

/// Loads --input or generates the --synth data set.
struct PipelineInput {
  EmbeddingSet data;
  std::optional<TeacherGroundTruth> truth;
};
PipelineInput load_input(const RunConfig& cfg);

Teacher train_teacher(const EmbeddingSet& data, const RunConfig& cfg,
                      std::vector<double>* loss = nullptr);

/// Steps 1-6. Errors are rethrown with the stage name in the message.
PipelineRun run_pipeline(const EmbeddingSet& data, const RunConfig& cfg);

/// Steps 3-6 from cached class statistics.
std::vector<CapacityReport> capacity_from_classes(const std::vector<ClassStatistics>& classes,
                                                  const RunConfig& cfg, Selector selector,
                                                  Parameterization param);

/// Oracle reports at each configured FAR.
std::vector<CapacityReport> oracle_reports(const TeacherGroundTruth& truth, const RunConfig& cfg);

/// Report JSON: config, per-stage summaries, class filter outcome, capacity
/// rows and, when available, oracle rows.
nlohmann::ordered_json report_json(const RunConfig& cfg, const PipelineRun& run,
                                   const std::vector<CapacityReport>* oracle);

std::string sweep_csv(const std::vector<CapacityReport>& rows);

}  // namespace repcap
