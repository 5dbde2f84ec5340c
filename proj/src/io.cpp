#include "apf/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace apf {

namespace {

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json interval(const Interval& r) { return json::array({r.lo, r.hi}); }

Interval interval_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a [lo, hi] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

int yaw_degrees(Yaw y) { return 90 * quarter_turns(y); }

Yaw yaw_from_degrees(int deg) {
  if (deg % 90 != 0 || deg < 0 || deg >= 360) throw ConfigError("rot_z must be one of 0, 90, 180, 270");
  return static_cast<Yaw>(deg / 90);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const Block& b) {
  return {{"id", b.id}, {"dims", vec3(b.dims)}, {"com_offset", vec3(b.com_offset)}, {"mass", b.mass}};
}

Block block_from_json(const json& j) {
  Block b;
  b.id = j.at("id").get<int>();
  b.dims = vec3_from(j.at("dims"));
  b.com_offset = vec3_from(j.at("com_offset"));
  b.mass = j.at("mass").get<double>();
  if (!b.valid()) throw ConfigError("block " + std::to_string(b.id) + " violates its invariants");
  return b;
}

json blocks_to_json(std::span<const Block> blocks) {
  json arr = json::array();
  for (const auto& b : blocks) arr.push_back(to_json(b));
  return arr;
}

std::vector<Block> blocks_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("block set must be a JSON array");
  std::vector<Block> out;
  for (const auto& e : j) out.push_back(block_from_json(e));
  return out;
}

json to_json(const Plan& plan) {
  json arr = json::array();
  for (const auto& a : plan.actions) {
    arr.push_back({{"block_id", a.block.id}, {"dx", a.pose.dx}, {"dy", a.pose.dy}, {"rot_z", yaw_degrees(a.pose.rot)}});
  }
  return arr;
}

Plan plan_from_json(const json& j, std::span<const Block> blocks) {
  if (!j.is_array()) throw ConfigError("plan must be a JSON array");
  Plan plan;
  for (const auto& e : j) {
    const int id = e.at("block_id").get<int>();
    const auto it = std::find_if(blocks.begin(), blocks.end(), [&](const Block& b) { return b.id == id; });
    if (it == blocks.end()) throw ConfigError("plan references unknown block " + std::to_string(id));
    plan.actions.push_back({*it, {e.at("dx").get<double>(), e.at("dy").get<double>(),
                                  yaw_from_degrees(e.at("rot_z").get<int>())}});
  }
  return plan;
}

json to_json(const LabeledPlan& lp) {
  json steps = json::array();
  for (bool b : lp.step_labels) steps.push_back(b);
  return {{"plan", to_json(lp.plan)}, {"steps", steps}, {"feasible", lp.overall}};
}

LabeledPlan labeled_plan_from_json(const json& j, std::span<const Block> blocks) {
  LabeledPlan lp;
  lp.plan = plan_from_json(j.at("plan"), blocks);
  for (const auto& b : j.at("steps")) lp.step_labels.push_back(b.get<bool>());
  lp.overall = j.at("feasible").get<bool>();
  if (lp.step_labels.size() != lp.plan.size()) throw ConfigError("step labels do not match the plan length");
  return lp;
}

json to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.connectivity)},
          {"hidden", c.hidden},
          {"rounds", c.rounds},
          {"plan_mean_of_probs", c.plan_mean_of_probs},
          {"step_uses_plan_readout", c.step_uses_plan_readout}};
}

ModelConfig model_config_from_json(const json& j) {
  reject_unknown(j, {"architecture", "hidden", "rounds", "plan_mean_of_probs", "step_uses_plan_readout"}, "model");
  ModelConfig c;
  if (j.contains("architecture")) c.connectivity = connectivity_from_string(j.at("architecture").get<std::string>());
  read(j, "hidden", c.hidden);
  read(j, "rounds", c.rounds);
  read(j, "plan_mean_of_probs", c.plan_mean_of_probs);
  read(j, "step_uses_plan_readout", c.step_uses_plan_readout);
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},           {"threads", c.threads}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j, {"learning_rate", "batch_size", "max_epochs", "patience", "threads"}, "train");
  TrainConfig c;
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "max_epochs", c.max_epochs);
  read(j, "patience", c.patience);
  read(j, "threads", c.threads);
  return c;
}

json to_json(const ActiveLearnConfig& c) {
  return {{"strategy", to_string(c.strategy)},
          {"ensemble_size", c.ensemble_size},
          {"batch_size", c.batch_size},
          {"pool_size", c.pool_size},
          {"iterations", c.iterations},
          {"max_length", c.max_length},
          {"init_towers", c.init_towers},
          {"init_min_length", c.init_min_length},
          {"init_max_length", c.init_max_length},
          {"validation_fraction", c.validation_fraction},
          {"noise", {{"enabled", c.noise.enabled}, {"sigma_xy", c.noise.sigma_xy}}},
          {"seed", c.seed},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"warm_start", c.warm_start},
          {"augment_validation", c.augment_validation},
          {"train_block_count", c.train_block_count},
          {"eval_block_count", c.eval_block_count},
          {"block_sampling",
           {{"dims", json::array({interval(c.block_sampling.dim_range[0]), interval(c.block_sampling.dim_range[1]),
                                  interval(c.block_sampling.dim_range[2])})},
            {"com_fraction", interval(c.block_sampling.com_fraction)},
            {"mass", interval(c.block_sampling.mass_range)}}},
          {"offset_fraction", c.pose_sampling.offset_fraction},
          {"test_sizes", c.test_sizes},
          {"test_per_size", c.test_per_size}};
}

ActiveLearnConfig active_learn_config_from_json(const json& j) {
  static const std::set<std::string> keys{
      "strategy",       "ensemble_size",   "batch_size",         "pool_size",          "iterations",
      "max_length",     "init_towers",     "init_min_length",    "init_max_length",    "validation_fraction",
      "noise",          "seed",            "model",              "train",              "warm_start",
      "augment_validation", "train_block_count", "eval_block_count", "block_sampling", "offset_fraction",
      "test_sizes",     "test_per_size"};
  reject_unknown(j, keys, "learner config");
  ActiveLearnConfig c;
  try {
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    read(j, "ensemble_size", c.ensemble_size);
    read(j, "batch_size", c.batch_size);
    read(j, "pool_size", c.pool_size);
    read(j, "iterations", c.iterations);
    read(j, "max_length", c.max_length);
    read(j, "init_towers", c.init_towers);
    read(j, "init_min_length", c.init_min_length);
    read(j, "init_max_length", c.init_max_length);
    read(j, "validation_fraction", c.validation_fraction);
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      reject_unknown(n, {"enabled", "sigma_xy"}, "noise");
      read(n, "enabled", c.noise.enabled);
      read(n, "sigma_xy", c.noise.sigma_xy);
    }
    read(j, "seed", c.seed);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    c.train.validation_fraction = c.validation_fraction;
    read(j, "warm_start", c.warm_start);
    read(j, "augment_validation", c.augment_validation);
    read(j, "train_block_count", c.train_block_count);
    read(j, "eval_block_count", c.eval_block_count);
    if (j.contains("block_sampling")) {
      const json& b = j.at("block_sampling");
      reject_unknown(b, {"dims", "com_fraction", "mass"}, "block_sampling");
      if (b.contains("dims")) {
        const json& d = b.at("dims");
        if (!d.is_array() || d.size() != 3) throw ConfigError("block_sampling.dims needs three ranges");
        for (std::size_t k = 0; k < 3; ++k) c.block_sampling.dim_range[k] = interval_from(d[k]);
      }
      if (b.contains("com_fraction")) c.block_sampling.com_fraction = interval_from(b.at("com_fraction"));
      if (b.contains("mass")) c.block_sampling.mass_range = interval_from(b.at("mass"));
    }
    read(j, "offset_fraction", c.pose_sampling.offset_fraction);
    read(j, "test_sizes", c.test_sizes);
    read(j, "test_per_size", c.test_per_size);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed learner config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const IterationMetrics& m) {
  json acc = json::object();
  for (const auto& a : m.accuracy) acc[std::to_string(a.size)] = a.balanced_accuracy;
  return {{"iteration", m.iteration},
          {"towers", m.towers},
          {"train_records", m.train_records},
          {"validation_records", m.validation_records},
          {"pool_size", m.pool_size},
          {"pool_score_max", m.pool_score_max},
          {"pool_score_mean", m.pool_score_mean},
          {"batch_score_mean", m.batch_score_mean},
          {"batch_feasible", m.batch_feasible},
          {"pool_fallback", m.pool_fallback},
          {"mean_val_loss", m.mean_val_loss},
          {"balanced_accuracy", acc}};
}

json to_json(const Checkpoint& c) {
  json members = json::array();
  for (const auto& p : c.ensemble.members) {
    members.push_back({{"hidden", p.hidden()},
                       {"size", p.flat().size()},
                       {"weights", std::vector<double>(p.flat().data(), p.flat().data() + p.flat().size())}});
  }
  return {{"format", "apf-ensemble"},
          {"version", 1},
          {"model", to_json(c.ensemble.config)},
          {"model_class", to_string(c.model_class)},
          {"seed", c.seed},
          {"node_features", kNodeFeatures},
          {"members", members},
          {"eval_blocks", blocks_to_json(c.eval_blocks)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "apf-ensemble" || j.at("version").get<int>() != 1) {
      throw CheckpointError("not an ensemble checkpoint");
    }
    if (j.at("node_features").get<int>() != kNodeFeatures) throw CheckpointError("feature width mismatch");
    Checkpoint c;
    c.ensemble.config = model_config_from_json(j.at("model"));
    c.model_class = model_class_from_string(j.at("model_class").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("members")) {
      const int hidden = m.at("hidden").get<int>();
      if (hidden != c.ensemble.config.hidden) throw CheckpointError("member width differs from the model config");
      const auto weights = m.at("weights").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(weights.size()) != GnnParamsd::size_for(hidden) ||
          m.at("size").get<std::size_t>() != weights.size()) {
        throw CheckpointError("member weight count does not match its shape");
      }
      GnnParamsd p(hidden);
      p.flat() = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
      if (!p.finite()) throw CheckpointError("non-finite weights");
      c.ensemble.members.push_back(std::move(p));
    }
    if (c.ensemble.members.empty()) throw CheckpointError("checkpoint has no members");
    c.eval_blocks = blocks_from_json(j.at("eval_blocks"));
    return c;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

json state_to_json(const LoopState& s) {
  std::ostringstream rng;
  rng << s.rng;
  json towers = json::array();
  for (std::size_t i = 0; i < s.dataset.towers.size(); ++i) {
    json t = to_json(s.dataset.towers[i]);
    t["validation"] = static_cast<bool>(s.dataset.in_validation[i]);
    towers.push_back(std::move(t));
  }
  Checkpoint ck{s.ensemble, s.config.model_class(), s.config.seed, s.eval_blocks};
  return {{"format", "apf-loop-state"},
          {"version", 1},
          {"config", to_json(s.config)},
          {"iteration", s.iteration},
          {"rng", rng.str()},
          {"ensemble", to_json(ck)},
          {"towers", towers}};
}

LoopState state_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "apf-loop-state") throw CheckpointError("not a loop state");
    LoopState s = prepare(active_learn_config_from_json(j.at("config")));
    s.iteration = j.at("iteration").get<std::size_t>();
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> s.rng;
    if (!rng) throw CheckpointError("unreadable generator state");
    s.ensemble = checkpoint_from_json(j.at("ensemble")).ensemble;
    if (s.ensemble.config != s.config.model) throw CheckpointError("ensemble does not match the stored config");
    for (const auto& t : j.at("towers")) {
      s.dataset.add_tower(labeled_plan_from_json(t, s.train_blocks), s.config.model_class(),
                          t.at("validation").get<bool>());
    }
    return s;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt loop state: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(1) + "\n"); }

}  // namespace apf
