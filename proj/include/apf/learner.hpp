#pragma once

#include "apf/acquisition.hpp"
#include "apf/domain.hpp"
#include "apf/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apf {

/// Independent random streams derived from one master seed.
enum class SeedStream : std::uint64_t {
  TrainBlocks = 1,
  EvalBlocks = 2,
  TestSet = 3,
  Loop = 4,
  EnsembleInit = 5,
  Evaluation = 6,
};

Rng stream_rng(std::uint64_t master_seed, SeedStream stream);
std::uint64_t stream_seed(std::uint64_t master_seed, SeedStream stream);

struct ActiveLearnConfig {
  StrategyKind strategy = StrategyKind::Sequential;
  std::size_t ensemble_size = 10;
  std::size_t batch_size = 10;  ///< towers executed per iteration
  std::size_t pool_size = 1000;
  std::size_t iterations = 36;
  std::size_t max_length = 5;
  std::size_t init_towers = 40;
  /// Initial tower sizes; 0 selects the strategy default (2..5 for
  /// whole-plan strategies, 2 otherwise).
  std::size_t init_min_length = 0;
  std::size_t init_max_length = 0;
  double validation_fraction = 0.2;
  NoiseConfig noise;
  std::uint64_t seed = 0;

  ModelConfig model;
  TrainConfig train;
  bool warm_start = true;
  bool augment_validation = true;

  std::size_t train_block_count = 10;
  std::size_t eval_block_count = 10;
  BlockSampling block_sampling;
  PoseSampling pose_sampling;

  /// Held-out oracle test set used for per-iteration accuracy.
  std::vector<std::size_t> test_sizes{2, 3, 4, 5};
  std::size_t test_per_size = 1000;

  ModelClass model_class() const { return model_class_for(strategy); }
  std::pair<std::size_t, std::size_t> init_lengths() const;
  void validate() const;
};

/// One training example plus the executed tower it came from.
struct Record {
  Plan plan;
  bool label = false;
  ModelClass model_class = ModelClass::SS;
  std::size_t tower = 0;
};

/// Labelled examples for one executed tower: the whole plan for Comp, one per
/// attempted step (2..first failure) for SS.
std::vector<Record> records_for(const LabeledPlan& tower, ModelClass cls, std::size_t tower_index);

struct Dataset {
  std::vector<LabeledPlan> towers;
  std::vector<bool> in_validation;  ///< per tower
  std::vector<Record> train;        ///< un-augmented
  std::vector<Record> validation;

  /// Appends a tower; every `1/validation_fraction`-th tower goes to
  /// validation.
  void add_tower(const LabeledPlan& tower, ModelClass cls, double validation_fraction);
  /// Appends a tower with a fixed split.
  void add_tower(const LabeledPlan& tower, ModelClass cls, bool validation);

  std::size_t validation_towers() const;
  SuccessIndex successes() const;
  std::vector<Plan> attempted() const;
};

/// Training items with four-fold rotation augmentation.
std::vector<TrainItem> training_items(std::span<const Record> records, bool augmented);

/// Oracle-labelled towers, half constructable and half not for every size.
std::vector<LabeledPlan> balanced_test_set(Rng& rng, std::span<const Block> blocks,
                                           std::span<const std::size_t> sizes, std::size_t per_size,
                                           const PoseSampling& poses = {});

/// Mean of true-positive and true-negative rates.
double balanced_accuracy(const std::vector<bool>& predicted, const std::vector<bool>& truth);

/// Feasibility predicted for whole plans by a trained ensemble of the given
/// class.
std::vector<double> predict_plans(const Ensemble& ens, ModelClass cls, std::span<const Plan> plans);

struct SizeAccuracy {
  std::size_t size = 0;
  double balanced_accuracy = 0.0;
};

std::vector<SizeAccuracy> accuracy_by_size(const Ensemble& ens, ModelClass cls, std::span<const LabeledPlan> test_set);

struct IterationMetrics {
  std::size_t iteration = 0;  ///< 0 is initialization
  std::size_t towers = 0;     ///< cumulative executed towers
  std::size_t train_records = 0;
  std::size_t validation_records = 0;
  std::size_t pool_size = 0;
  double pool_score_max = 0.0;
  double pool_score_mean = 0.0;
  double batch_score_mean = 0.0;
  std::size_t batch_feasible = 0;
  bool pool_fallback = false;
  double mean_val_loss = 0.0;
  std::vector<SizeAccuracy> accuracy;
};

/// Complete loop state; enough to resume exactly.
struct LoopState {
  ActiveLearnConfig config;
  std::vector<Block> train_blocks;
  std::vector<Block> eval_blocks;
  std::vector<LabeledPlan> test_set;
  Ensemble ensemble;
  Dataset dataset;
  Rng rng;
  std::size_t iteration = 0;
};

/// Blocks, test set, fresh ensemble and loop generator; no data yet.
LoopState prepare(const ActiveLearnConfig& cfg);

/// prepare + the initial random towers, executed and split.
LoopState initialize(const ActiveLearnConfig& cfg);

/// Trains the fresh ensemble on the initial towers.
IterationMetrics train_initial(LoopState& state);

/// Generate, score, execute the top batch, grow the data and retrain.
IterationMetrics run_iteration(LoopState& state);

using RecordSink = std::function<void(const IterationMetrics&, const LoopState&)>;

/// initialize + `iterations` iterations, reporting after each.
LoopState run(const ActiveLearnConfig& cfg, const RecordSink& sink = {});

/// Continues a restored state up to cfg.iterations.
void resume(LoopState& state, const RecordSink& sink = {});

}  // namespace apf
