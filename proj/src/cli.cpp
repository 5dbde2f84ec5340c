#include "apf/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace apf::cli {

namespace fs = std::filesystem;

namespace {

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

json dataset_json(const LoopState& s) {
  json towers = json::array();
  for (std::size_t i = 0; i < s.dataset.towers.size(); ++i) {
    json t = to_json(s.dataset.towers[i]);
    t["validation"] = static_cast<bool>(s.dataset.in_validation[i]);
    towers.push_back(std::move(t));
  }
  return {{"blocks", blocks_to_json(s.train_blocks)}, {"towers", towers}};
}

void checkpoint_all(const fs::path& dir, const LoopState& s) {
  write_json_file(dir / kModelFile,
                  to_json(Checkpoint{s.ensemble, s.config.model_class(), s.config.seed, s.eval_blocks}));
  write_json_file(dir / kDatasetFile, dataset_json(s));
  // State last: a resumable state always has matching companions.
  write_text_file(dir / kStateFile, state_to_json(s).dump() + "\n");
}

// Any failure to read a checkpoint-like file is a checkpoint error.
json read_checkpoint_file(const fs::path& path) {
  try {
    return read_json_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(e.what());
  }
}

std::vector<TaskObjective> tasks_from(const std::string& name) {
  if (name == "all") {
    return {TaskObjective::TallestTower, TaskObjective::LongestOverhang, TaskObjective::MaxUnsupportedArea};
  }
  return {task_from_string(name)};
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  json learner = j;
  ExperimentConfig c;
  std::optional<ModelClass> declared;
  try {
    if (j.contains("model_class")) declared = model_class_from_string(j.at("model_class").get<std::string>());
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("evaluation")) {
      const json& e = j.at("evaluation");
      for (const auto& [key, value] : e.items()) {
        if (key != "trials" && key != "samples" && key != "tasks" && key != "noise_sigma") {
          throw ConfigError("unknown key '" + key + "' in evaluation");
        }
      }
      if (e.contains("trials")) c.evaluation.trials = e.at("trials").get<std::size_t>();
      if (e.contains("samples")) c.evaluation.samples = e.at("samples").get<std::size_t>();
      if (e.contains("noise_sigma")) c.evaluation.noise_sigma = e.at("noise_sigma").get<double>();
      if (e.contains("tasks")) {
        c.evaluation.tasks.clear();
        for (const auto& t : e.at("tasks")) c.evaluation.tasks.push_back(task_from_string(t.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const char* key : {"model_class", "output_dir", "evaluation"}) learner.erase(key);
  c.learner = active_learn_config_from_json(learner);
  c.model_class = c.learner.model_class();
  if (declared && *declared != c.model_class) {
    throw ConfigError(std::string("strategy '") + to_string(c.learner.strategy) + "' requires model class '" +
                      to_string(c.model_class) + "', config declares '" + to_string(*declared) + "'");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.learner);
  j["model_class"] = to_string(c.model_class);
  json tasks = json::array();
  for (auto t : c.evaluation.tasks) tasks.push_back(to_string(t));
  j["evaluation"] = {{"trials", c.evaluation.trials},
                     {"samples", c.evaluation.samples},
                     {"tasks", tasks},
                     {"noise_sigma", c.evaluation.noise_sigma}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

fs::path default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

int cmd_learn(const LearnOptions& opts, std::ostream& err) {
  LoopState state;
  fs::path dir;
  bool resuming = false;
  try {
    if (opts.resume) {
      resuming = true;
      dir = *opts.resume;
      state = state_from_json(read_checkpoint_file(dir / kStateFile));
      if (opts.threads > 0) state.config.train.threads = opts.threads;
    } else {
      if (!opts.config) throw ConfigError("learn needs --config or --resume");
      ExperimentConfig cfg = experiment_config_from_json(read_json_file(*opts.config));
      if (opts.threads > 0) cfg.learner.train.threads = opts.threads;
      dir = opts.out ? *opts.out
                     : (!cfg.output_dir.empty() ? cfg.output_dir : default_output_root() / opts.config->stem());
      ensure_writable_dir(dir);
      // Thread count does not change results, so it stays out of the log.
      ExperimentConfig echoed = cfg;
      echoed.learner.train.threads = 1;
      echoed.output_dir.clear();
      write_text_file(dir / kRunLog, json{{"type", "config"}, {"config", to_json(echoed)}}.dump() + "\n");
      state = initialize(cfg.learner);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  }

  try {
    const fs::path log = dir / kRunLog;
    auto sink = [&](const IterationMetrics& m, const LoopState& s) {
      json line = to_json(m);
      line["type"] = "iteration";
      append_line(log, line.dump());
      checkpoint_all(dir, s);
    };
    if (!resuming) sink(train_initial(state), state);
    resume(state, sink);
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& err) {
  std::vector<TaskObjective> tasks;
  FeasibilityModel model;
  std::optional<Checkpoint> ck;
  std::vector<Block> blocks;
  try {
    tasks = tasks_from(opts.task);
    if (opts.trials == 0 || opts.samples == 0) throw ConfigError("trials and samples must be positive");
    if (opts.noise_sigma < 0) throw ConfigError("noise sigma must be non-negative");
    if (opts.checkpoint) ck = checkpoint_from_json(read_checkpoint_file(*opts.checkpoint));
    if (opts.model == "learned") {
      if (!ck) throw ConfigError("--model learned needs --checkpoint");
      model = LearnedFeasibility{&ck->ensemble, ck->model_class};
    } else if (opts.model == "analytical") {
      model = AnalyticalFeasibility{};
    } else if (opts.model == "simulation") {
      model = SimulationFeasibility{};
    } else {
      throw ConfigError("unknown model '" + opts.model + "'");
    }
    if (ck) {
      blocks = ck->eval_blocks;
    } else {
      Rng rng = stream_rng(opts.seed, SeedStream::EvalBlocks);
      blocks = sample_block_set(rng, ActiveLearnConfig{}.eval_block_count);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  }

  try {
    ensure_writable_dir(opts.out);
    EvalSettings settings;
    settings.trials = opts.trials;
    settings.samples = opts.samples;
    settings.noise = opts.noise_sigma > 0 ? NoiseConfig::gaussian(opts.noise_sigma) : NoiseConfig::none();
    std::ostringstream csv;
    json summary = json::object();
    bool header = true;
    const std::string name = model_name(model);
    for (auto task : tasks) {
      // One stream per task so single-task runs reproduce the all-task rows.
      Rng rng = stream_rng(opts.seed + static_cast<std::uint64_t>(task), SeedStream::Evaluation);
      const SuiteResult r = evaluate_suite(model, task, blocks, settings, rng);
      write_eval_csv(csv, r.trials, task, name, header);
      header = false;
      summary[to_string(task)] = {{"median", r.summary.median},
                                  {"q25", r.summary.q25},
                                  {"q75", r.summary.q75},
                                  {"trials", r.trials.size()}};
    }
    write_text_file(opts.out / "eval.csv", csv.str());
    write_json_file(opts.out / "summary.json",
                    {{"model", name}, {"noise_sigma", opts.noise_sigma}, {"samples", opts.samples}, {"tasks", summary}});
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

std::vector<std::size_t> parse_size_range(const std::string& text) {
  const auto dots = text.find("..");
  std::size_t lo = 0, hi = 0;
  try {
    if (dots == std::string::npos) {
      lo = hi = std::stoul(text);
    } else {
      lo = std::stoul(text.substr(0, dots));
      hi = std::stoul(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw ConfigError("sizes must look like A..B");
  }
  if (lo < 2 || hi < lo) throw ConfigError("sizes must satisfy 2 <= A <= B");
  std::vector<std::size_t> out;
  for (std::size_t s = lo; s <= hi; ++s) out.push_back(s);
  return out;
}

int cmd_oracle(const OracleOptions& opts, std::ostream& err) {
  std::vector<std::size_t> sizes;
  std::vector<Block> blocks;
  std::vector<LabeledPlan> towers;
  try {
    if (opts.count < 1) throw ConfigError("count must be at least 1");
    if (opts.out.empty()) throw ConfigError("oracle needs --out");
    sizes = parse_size_range(opts.sizes);
    ActiveLearnConfig defaults;
    const std::size_t n_blocks = std::max(defaults.eval_block_count, sizes.back());
    Rng block_rng = stream_rng(opts.seed, SeedStream::EvalBlocks);
    blocks = sample_block_set(block_rng, n_blocks);
    Rng rng = stream_rng(opts.seed, SeedStream::TestSet);
    towers = balanced_test_set(rng, blocks, sizes, opts.count);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    if (opts.out.has_parent_path()) ensure_writable_dir(opts.out.parent_path());
    json arr = json::array();
    for (const auto& t : towers) arr.push_back(to_json(t));
    write_text_file(opts.out, json{{"format", "apf-oracle-set"},
                                   {"seed", opts.seed},
                                   {"count_per_size", opts.count},
                                   {"sizes", sizes},
                                   {"blocks", blocks_to_json(blocks)},
                                   {"towers", arr}}
                                  .dump() +
                                  "\n");
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

}  // namespace apf::cli
