#pragma once

#include "apf/io.hpp"
#include "apf/learner.hpp"
#include "apf/planner.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace apf::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kCheckpointError = 4,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "APF_OUTPUT_ROOT";

struct EvaluationConfig {
  std::size_t trials = 50;
  std::size_t samples = 2000;
  std::vector<TaskObjective> tasks{TaskObjective::TallestTower, TaskObjective::LongestOverhang,
                                   TaskObjective::MaxUnsupportedArea};
  double noise_sigma = 0.0;
};

/// Learner settings plus the model class, evaluation settings and output
/// location.
struct ExperimentConfig {
  ActiveLearnConfig learner;
  ModelClass model_class = ModelClass::SS;
  EvaluationConfig evaluation;
  std::filesystem::path output_dir;
};

/// Throws ConfigError, including for a strategy/model-class mismatch.
ExperimentConfig experiment_config_from_json(const json& j);
json to_json(const ExperimentConfig& c);

std::filesystem::path default_output_root();

struct LearnOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> out;
  int threads = 0;  ///< 0 keeps the config value
};

/// Files written into the output directory.
inline constexpr const char* kRunLog = "run_log.jsonl";
inline constexpr const char* kStateFile = "state.json";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kDatasetFile = "dataset.json";

int cmd_learn(const LearnOptions& opts, std::ostream& err);

struct EvaluateOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::string task = "all";
  std::size_t trials = 50;
  std::size_t samples = 2000;
  std::string model = "learned";
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
};

/// Writes eval.csv (one row per trial and task) and summary.json.
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& err);

struct OracleOptions {
  std::size_t count = 1000;
  std::string sizes = "2..7";
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

/// Parses "A..B" (or a single "A").
std::vector<std::size_t> parse_size_range(const std::string& text);

int cmd_oracle(const OracleOptions& opts, std::ostream& err);

}  // namespace apf::cli
