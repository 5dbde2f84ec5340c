#include "apf/cli.hpp"
#include "apf/io.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace apf;
using namespace apf::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json tiny_config() {
  return json{{"strategy", "sequential"},
              {"ensemble_size", 2},
              {"batch_size", 2},
              {"pool_size", 20},
              {"iterations", 2},
              {"init_towers", 6},
              {"seed", 3},
              {"model", {{"architecture", "tgn"}, {"hidden", 6}, {"rounds", 2}}},
              {"train", {{"max_epochs", 2}}},
              {"test_sizes", {2}},
              {"test_per_size", 6}};
}

}  // namespace

TEST_CASE("plan and block JSON round-trip exactly") {
  Rng rng(1);
  const auto blocks = sample_block_set(rng, 6);
  CHECK(blocks_from_json(blocks_to_json(blocks)) == blocks);
  for (int t = 0; t < 20; ++t) {
    const Plan plan = sample_plan(rng, blocks, 4);
    const json text = json::parse(to_json(plan).dump());
    CHECK(plan_from_json(text, blocks) == plan);
    const LabeledPlan lp = label_noiseless(plan);
    const LabeledPlan back = labeled_plan_from_json(json::parse(to_json(lp).dump()), blocks);
    CHECK(back.plan == plan);
    CHECK(back.step_labels == lp.step_labels);
    CHECK(back.overall == lp.overall);
  }
  CHECK(to_json(apf::test::stack({apf::test::at(blocks[0], 0, 0, Yaw::k270)}))[0]["rot_z"] == 270);
  json bad = to_json(sample_plan(rng, blocks, 2));
  bad[0]["rot_z"] = 45;
  CHECK_THROWS_AS(plan_from_json(bad, blocks), ConfigError);
  bad = to_json(sample_plan(rng, blocks, 2));
  bad[0]["block_id"] = 99;
  CHECK_THROWS_AS(plan_from_json(bad, blocks), ConfigError);
}

TEST_CASE("learner config JSON") {
  ActiveLearnConfig c;
  c.strategy = StrategyKind::Incremental;
  c.noise = NoiseConfig::gaussian(0.004);
  c.model.connectivity = Connectivity::FCGN;
  c.block_sampling.mass_range = {0.2, 0.9};
  const ActiveLearnConfig back = active_learn_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.noise.enabled);
  CHECK(back.model.connectivity == Connectivity::FCGN);

  CHECK_THROWS_AS(active_learn_config_from_json({{"stratgey", "sequential"}}), ConfigError);
  CHECK_THROWS_AS(active_learn_config_from_json({{"strategy", "bald"}}), ConfigError);
  CHECK_THROWS_AS(active_learn_config_from_json({{"ensemble_size", "ten"}}), ConfigError);
  CHECK_THROWS_AS(active_learn_config_from_json({{"model", {{"depth", 3}}}}), ConfigError);
}

TEST_CASE("experiment config checks the model class") {
  json j = tiny_config();
  j["model_class"] = "ss";
  CHECK(experiment_config_from_json(j).model_class == ModelClass::SS);
  j["model_class"] = "comp";
  CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
  j["strategy"] = "complete";
  CHECK(experiment_config_from_json(j).model_class == ModelClass::Comp);
  j["evaluation"] = {{"trials", 3}, {"tasks", {"overhang"}}};
  const auto c = experiment_config_from_json(j);
  CHECK(c.evaluation.trials == 3);
  CHECK(c.evaluation.tasks == std::vector<TaskObjective>{TaskObjective::LongestOverhang});
  j["evaluation"] = {{"trails", 3}};
  CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
}

TEST_CASE("checkpoint round-trip and corruption") {
  Rng rng(2);
  Checkpoint ck{Ensemble::create({Connectivity::FCGN, 5, true, false}, 2, 4), ModelClass::Comp, 4,
                sample_block_set(rng, 5)};
  const Checkpoint back = checkpoint_from_json(json::parse(to_json(ck).dump()));
  CHECK(back.ensemble.config == ck.ensemble.config);
  CHECK(back.model_class == ModelClass::Comp);
  CHECK(back.ensemble.members[1].flat() == ck.ensemble.members[1].flat());
  CHECK(back.eval_blocks == ck.eval_blocks);

  json bad = to_json(ck);
  bad["members"][0]["weights"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(bad), CheckpointError);
  bad = to_json(ck);
  bad["format"] = "other";
  CHECK_THROWS_AS(checkpoint_from_json(bad), CheckpointError);
  bad = to_json(ck);
  bad["members"] = json::array();
  CHECK_THROWS_AS(checkpoint_from_json(bad), CheckpointError);
  CHECK_THROWS_AS(checkpoint_from_json(json::object()), CheckpointError);
}

TEST_CASE("loop state round-trip resumes identically") {
  ActiveLearnConfig cfg = experiment_config_from_json(tiny_config()).learner;
  LoopState s = initialize(cfg);
  train_initial(s);
  run_iteration(s);
  LoopState restored = state_from_json(json::parse(state_to_json(s).dump()));
  CHECK(restored.iteration == 1);
  CHECK(restored.dataset.towers.size() == s.dataset.towers.size());
  CHECK(restored.dataset.in_validation == s.dataset.in_validation);
  const auto a = run_iteration(s);
  const auto b = run_iteration(restored);
  CHECK(to_json(a) == to_json(b));
  CHECK(s.ensemble.members[0].flat() == restored.ensemble.members[0].flat());
}

TEST_CASE("parse_size_range") {
  CHECK(parse_size_range("2..4") == std::vector<std::size_t>{2, 3, 4});
  CHECK(parse_size_range("3") == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(parse_size_range("1..3"), ConfigError);
  CHECK_THROWS_AS(parse_size_range("5..3"), ConfigError);
  CHECK_THROWS_AS(parse_size_range("a..b"), ConfigError);
}

TEST_CASE("learn writes logs and checkpoints, and resume continues") {
  const fs::path dir = scratch("learn");
  const fs::path cfg = dir / "tiny.json";
  write_json_file(cfg, tiny_config());
  std::ostringstream err;

  LearnOptions o;
  o.config = cfg;
  o.out = dir / "run";
  REQUIRE(cmd_learn(o, err) == kOk);
  for (const char* f : {kRunLog, kStateFile, kModelFile, kDatasetFile}) CHECK(fs::exists(dir / "run" / f));
  const std::string log = slurp(dir / "run" / kRunLog);
  CHECK(std::count(log.begin(), log.end(), '\n') == 4);

  json partial = tiny_config();
  partial["iterations"] = 1;
  write_json_file(dir / "one.json", partial);
  LearnOptions first;
  first.config = dir / "one.json";
  first.out = dir / "resumed";
  REQUIRE(cmd_learn(first, err) == kOk);
  json state = read_json_file(dir / "resumed" / kStateFile);
  state["config"]["iterations"] = 2;
  write_json_file(dir / "resumed" / kStateFile, state);
  LearnOptions cont;
  cont.resume = dir / "resumed";
  REQUIRE(cmd_learn(cont, err) == kOk);
  const std::string resumed = slurp(dir / "resumed" / kRunLog);
  // Iteration lines match; only the echoed config differs.
  CHECK(resumed.substr(resumed.find('\n')) == log.substr(log.find('\n')));
}

TEST_CASE("learn error codes") {
  const fs::path dir = scratch("errors");
  std::ostringstream err;
  LearnOptions o;
  CHECK(cmd_learn(o, err) == kConfigError);

  o.config = dir / "missing.json";
  CHECK(cmd_learn(o, err) == kIoError);

  write_text_file(dir / "broken.json", "{ not json");
  o.config = dir / "broken.json";
  CHECK(cmd_learn(o, err) == kConfigError);

  json j = tiny_config();
  j["model_class"] = "comp";
  write_json_file(dir / "mismatch.json", j);
  o.config = dir / "mismatch.json";
  CHECK(cmd_learn(o, err) == kConfigError);

  LearnOptions r;
  r.resume = dir / "nowhere";
  CHECK(cmd_learn(r, err) == kCheckpointError);
}

TEST_CASE("learn falls back to the output root environment variable") {
  const fs::path dir = scratch("envroot");
  write_json_file(dir / "named.json", tiny_config());
  ::setenv(kOutputRootEnv, (dir / "root").c_str(), 1);
  CHECK(default_output_root() == dir / "root");
  std::ostringstream err;
  LearnOptions o;
  o.config = dir / "named.json";
  CHECK(cmd_learn(o, err) == kOk);
  CHECK(fs::exists(dir / "root" / "named" / kRunLog));
  ::unsetenv(kOutputRootEnv);
  CHECK(default_output_root() == fs::path("runs"));
}

TEST_CASE("evaluate") {
  const fs::path dir = scratch("evaluate");
  std::ostringstream err;
  EvaluateOptions o;
  o.model = "analytical";
  o.trials = 3;
  o.samples = 50;
  o.out = dir / "analytical";
  REQUIRE(cmd_evaluate(o, err) == kOk);
  const std::string csv = slurp(o.out / "eval.csv");
  CHECK(csv.rfind("trial,task,model,v_gt,realized,regret\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  const json summary = read_json_file(o.out / "summary.json");
  CHECK(summary["tasks"]["tallest"]["median"] == 0.0);

  // A single task reproduces its rows from the all-task run.
  o.task = "overhang";
  o.out = dir / "single";
  REQUIRE(cmd_evaluate(o, err) == kOk);
  const std::string single = slurp(o.out / "eval.csv");
  std::istringstream lines(single);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(csv.find(line) != std::string::npos);

  EvaluateOptions learned;
  learned.out = dir / "learned";
  CHECK(cmd_evaluate(learned, err) == kConfigError);
  write_text_file(dir / "corrupt.json", "{\"format\": \"apf-ensemble\"}");
  learned.checkpoint = dir / "corrupt.json";
  CHECK(cmd_evaluate(learned, err) == kCheckpointError);
  learned.checkpoint = dir / "absent.json";
  CHECK(cmd_evaluate(learned, err) == kCheckpointError);
  o.task = "widest";
  CHECK(cmd_evaluate(o, err) == kConfigError);
}

TEST_CASE("evaluate a trained checkpoint") {
  const fs::path dir = scratch("evalckpt");
  write_json_file(dir / "tiny.json", tiny_config());
  std::ostringstream err;
  LearnOptions l;
  l.config = dir / "tiny.json";
  l.out = dir / "run";
  REQUIRE(cmd_learn(l, err) == kOk);
  EvaluateOptions e;
  e.checkpoint = dir / "run" / kModelFile;
  e.trials = 2;
  e.samples = 30;
  e.noise_sigma = 0.002;
  e.out = dir / "eval";
  CHECK(cmd_evaluate(e, err) == kOk);
  CHECK(read_json_file(e.out / "summary.json")["model"] == "learned-ss");
}

TEST_CASE("oracle") {
  const fs::path dir = scratch("oracle");
  std::ostringstream err;
  OracleOptions o;
  o.count = 6;
  o.sizes = "2..3";
  o.out = dir / "set.json";
  REQUIRE(cmd_oracle(o, err) == kOk);
  const json j = read_json_file(o.out);
  CHECK(j["towers"].size() == 12);
  const auto blocks = blocks_from_json(j["blocks"]);
  for (const auto& t : j["towers"]) {
    const LabeledPlan lp = labeled_plan_from_json(t, blocks);
    CHECK(lp.overall == is_constructable(lp.plan));
  }
  o.sizes = "1..3";
  CHECK(cmd_oracle(o, err) == kConfigError);
  o.sizes = "2..3";
  o.count = 0;
  CHECK(cmd_oracle(o, err) == kConfigError);
}
