#pragma once

#include "apf/domain.hpp"
#include "apf/learner.hpp"
#include "apf/model.hpp"
#include "apf/planner.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace apf {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const Block& b);
Block block_from_json(const json& j);
json blocks_to_json(std::span<const Block> blocks);
std::vector<Block> blocks_from_json(const json& j);

/// [{block_id, dx, dy, rot_z}] with rot_z in degrees.
json to_json(const Plan& plan);
/// Resolves block ids against `blocks`.
Plan plan_from_json(const json& j, std::span<const Block> blocks);

json to_json(const LabeledPlan& lp);
LabeledPlan labeled_plan_from_json(const json& j, std::span<const Block> blocks);

json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const json& j);
json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

/// Every field, defaults included.
json to_json(const ActiveLearnConfig& c);
/// Missing keys take defaults; unknown keys are a ConfigError.
ActiveLearnConfig active_learn_config_from_json(const json& j);

json to_json(const IterationMetrics& m);

/// Trained model plus what is needed to evaluate it.
struct Checkpoint {
  Ensemble ensemble;
  ModelClass model_class = ModelClass::SS;
  std::uint64_t seed = 0;
  std::vector<Block> eval_blocks;
};

json to_json(const Checkpoint& c);
/// Throws CheckpointError on any structural problem.
Checkpoint checkpoint_from_json(const json& j);

json state_to_json(const LoopState& s);
/// Rebuilds derived parts (blocks, test set) from the stored config.
LoopState state_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace apf
