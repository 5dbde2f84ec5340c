#include "apf/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace apf {

std::uint64_t stream_seed(std::uint64_t master_seed, SeedStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream), 0xA9F5u};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Rng stream_rng(std::uint64_t master_seed, SeedStream stream) { return Rng(stream_seed(master_seed, stream)); }

std::pair<std::size_t, std::size_t> ActiveLearnConfig::init_lengths() const {
  std::size_t lo = init_min_length;
  std::size_t hi = init_max_length;
  if (lo == 0) lo = 2;
  if (hi == 0) hi = model_class() == ModelClass::Comp ? std::min<std::size_t>(5, max_length) : 2;
  return {lo, hi};
}

void ActiveLearnConfig::validate() const {
  if (ensemble_size < 1) throw ConfigError("ensemble_size must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (batch_size > pool_size) throw ConfigError("batch_size must not exceed pool_size");
  if (max_length < 2) throw ConfigError("max_length must be at least 2");
  if (train_block_count < max_length) throw ConfigError("train_block_count must be at least max_length");
  if (init_towers < 2) throw ConfigError("init_towers must be at least 2");
  const auto [lo, hi] = init_lengths();
  if (lo < 2 || hi < lo || hi > max_length) throw ConfigError("initial tower sizes must lie within 2..max_length");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (noise.sigma_xy < 0) throw ConfigError("noise sigma must be non-negative");
  for (std::size_t s : test_sizes) {
    if (s < 2 || s > eval_block_count) throw ConfigError("test sizes must lie within 2..eval_block_count");
  }
  if (model.hidden < 1) throw ConfigError("hidden width must be at least 1");
  if (model.rounds < 1) throw ConfigError("message-passing rounds must be at least 1");
  train.validate();
}

std::vector<Record> records_for(const LabeledPlan& tower, ModelClass cls, std::size_t tower_index) {
  std::vector<Record> out;
  if (cls == ModelClass::Comp) {
    out.push_back({tower.plan, tower.overall, cls, tower_index});
    return out;
  }
  for (std::size_t i = 1; i < tower.plan.size(); ++i) {
    out.push_back({tower.plan.prefix(i + 1), tower.step_labels[i], cls, tower_index});
    if (!tower.step_labels[i]) break;
  }
  return out;
}

void Dataset::add_tower(const LabeledPlan& tower, ModelClass cls, double validation_fraction) {
  const auto t = static_cast<double>(towers.size());
  const bool val = std::floor(validation_fraction * (t + 1)) > std::floor(validation_fraction * t);
  add_tower(tower, cls, val);
}

void Dataset::add_tower(const LabeledPlan& tower, ModelClass cls, bool validation) {
  const std::size_t index = towers.size();
  towers.push_back(tower);
  in_validation.push_back(validation);
  auto& dest = validation ? this->validation : train;
  for (auto& r : records_for(tower, cls, index)) dest.push_back(std::move(r));
}

std::size_t Dataset::validation_towers() const {
  return static_cast<std::size_t>(std::count(in_validation.begin(), in_validation.end(), true));
}

SuccessIndex Dataset::successes() const {
  SuccessIndex idx;
  for (const auto& t : towers) {
    for (std::size_t i = 1; i < t.plan.size() && t.step_labels[i]; ++i) idx.add(t.plan.prefix(i + 1));
  }
  return idx;
}

std::vector<Plan> Dataset::attempted() const {
  std::vector<Plan> out;
  out.reserve(towers.size());
  for (const auto& t : towers) out.push_back(t.plan);
  return out;
}

std::vector<TrainItem> training_items(std::span<const Record> records, bool augmented) {
  std::vector<TrainItem> out;
  out.reserve(records.size() * (augmented ? 4 : 1));
  for (const auto& r : records) {
    if (!augmented) {
      out.push_back({r.plan, r.label, r.model_class});
      continue;
    }
    for (Yaw y : {Yaw::k0, Yaw::k90, Yaw::k180, Yaw::k270}) out.push_back({rotate_plan(r.plan, y), r.label, r.model_class});
  }
  return out;
}

std::vector<LabeledPlan> balanced_test_set(Rng& rng, std::span<const Block> blocks,
                                           std::span<const std::size_t> sizes, std::size_t per_size,
                                           const PoseSampling& poses) {
  std::vector<LabeledPlan> out;
  const std::size_t want_pos = per_size - per_size / 2;
  const std::size_t want_neg = per_size / 2;
  for (std::size_t size : sizes) {
    std::size_t pos = 0, neg = 0;
    // Rejection sampling; feasible towers get rarer with size.
    const std::size_t budget = 10000 * std::max<std::size_t>(per_size, 1);
    for (std::size_t tries = 0; (pos < want_pos || neg < want_neg) && tries < budget; ++tries) {
      LabeledPlan lp = label_noiseless(sample_plan(rng, blocks, size, poses));
      if (lp.overall && pos < want_pos) {
        ++pos;
        out.push_back(std::move(lp));
      } else if (!lp.overall && neg < want_neg) {
        ++neg;
        out.push_back(std::move(lp));
      }
    }
    if (pos < want_pos || neg < want_neg) throw ConfigError("could not balance the oracle test set for this size");
  }
  return out;
}

double balanced_accuracy(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  std::size_t tp = 0, tn = 0, p = 0, n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++p;
      tp += predicted[i] ? 1 : 0;
    } else {
      ++n;
      tn += predicted[i] ? 0 : 1;
    }
  }
  const double tpr = p ? static_cast<double>(tp) / static_cast<double>(p) : 1.0;
  const double tnr = n ? static_cast<double>(tn) / static_cast<double>(n) : 1.0;
  return 0.5 * (tpr + tnr);
}

std::vector<double> predict_plans(const Ensemble& ens, ModelClass cls, std::span<const Plan> plans) {
  std::vector<double> out(plans.size());
  constexpr std::size_t chunk = 512;
  for (std::size_t start = 0; start < plans.size(); start += chunk) {
    const auto part = plans.subspan(start, std::min(chunk, plans.size() - start));
    if (cls == ModelClass::Comp) {
      const auto probs = member_plan_probs(ens, part);
      for (std::size_t i = 0; i < part.size(); ++i) {
        out[start + i] = std::accumulate(probs[i].begin(), probs[i].end(), 0.0) / static_cast<double>(ens.size());
      }
    } else {
      const auto steps = member_step_probs(ens, part);
      for (std::size_t i = 0; i < part.size(); ++i) out[start + i] = plan_feasibility_ss(steps[i]);
    }
  }
  return out;
}

std::vector<SizeAccuracy> accuracy_by_size(const Ensemble& ens, ModelClass cls, std::span<const LabeledPlan> test_set) {
  std::vector<std::size_t> sizes;
  for (const auto& t : test_set) {
    if (std::find(sizes.begin(), sizes.end(), t.plan.size()) == sizes.end()) sizes.push_back(t.plan.size());
  }
  std::sort(sizes.begin(), sizes.end());
  std::vector<SizeAccuracy> out;
  for (std::size_t size : sizes) {
    std::vector<Plan> plans;
    std::vector<bool> truth;
    for (const auto& t : test_set) {
      if (t.plan.size() != size) continue;
      plans.push_back(t.plan);
      truth.push_back(t.overall);
    }
    const auto probs = predict_plans(ens, cls, plans);
    std::vector<bool> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= 0.5;
    out.push_back({size, balanced_accuracy(pred, truth)});
  }
  return out;
}

namespace {

std::vector<MemberTrainLog> retrain(LoopState& s) {
  const auto& cfg = s.config;
  TrainConfig tc = cfg.train;
  tc.validation_fraction = cfg.validation_fraction;
  tc.seed = s.rng();
  if (!cfg.warm_start) s.ensemble = Ensemble::create(cfg.model, cfg.ensemble_size, s.rng());
  const auto train_items = training_items(s.dataset.train, true);
  const auto val_items = training_items(s.dataset.validation, cfg.augment_validation);
  return train(s.ensemble, train_items, val_items, tc);
}

double mean_val_loss(const std::vector<MemberTrainLog>& logs) {
  double acc = 0.0;
  for (const auto& l : logs) acc += l.best_val_loss;
  return logs.empty() ? 0.0 : acc / static_cast<double>(logs.size());
}

void fill_common(IterationMetrics& m, const LoopState& s, const std::vector<MemberTrainLog>& logs) {
  m.iteration = s.iteration;
  m.towers = s.dataset.towers.size();
  m.train_records = s.dataset.train.size();
  m.validation_records = s.dataset.validation.size();
  m.mean_val_loss = mean_val_loss(logs);
  if (!s.test_set.empty()) m.accuracy = accuracy_by_size(s.ensemble, s.config.model_class(), s.test_set);
}

}  // namespace

LoopState prepare(const ActiveLearnConfig& cfg) {
  cfg.validate();
  LoopState s;
  s.config = cfg;
  Rng block_rng = stream_rng(cfg.seed, SeedStream::TrainBlocks);
  s.train_blocks = sample_block_set(block_rng, cfg.train_block_count, cfg.block_sampling);
  Rng eval_rng = stream_rng(cfg.seed, SeedStream::EvalBlocks);
  s.eval_blocks = sample_block_set(eval_rng, cfg.eval_block_count, cfg.block_sampling);
  if (cfg.test_per_size > 0) {
    Rng test_rng = stream_rng(cfg.seed, SeedStream::TestSet);
    s.test_set = balanced_test_set(test_rng, s.eval_blocks, cfg.test_sizes, cfg.test_per_size, cfg.pose_sampling);
  }
  s.ensemble = Ensemble::create(cfg.model, cfg.ensemble_size, stream_seed(cfg.seed, SeedStream::EnsembleInit));
  s.rng = stream_rng(cfg.seed, SeedStream::Loop);
  s.iteration = 0;
  return s;
}

LoopState initialize(const ActiveLearnConfig& cfg) {
  LoopState s = prepare(cfg);
  const auto [lo, hi] = cfg.init_lengths();
  std::uniform_int_distribution<std::size_t> len(lo, hi);
  for (std::size_t t = 0; t < cfg.init_towers; ++t) {
    const Plan plan = sample_plan(s.rng, s.train_blocks, len(s.rng), cfg.pose_sampling);
    s.dataset.add_tower(execute(plan, cfg.noise, s.rng), cfg.model_class(), cfg.validation_fraction);
  }
  return s;
}

IterationMetrics train_initial(LoopState& s) {
  const auto logs = retrain(s);
  IterationMetrics m;
  fill_common(m, s, logs);
  return m;
}

IterationMetrics run_iteration(LoopState& s) {
  const auto& cfg = s.config;
  IterationMetrics m;
  const SuccessIndex successes = s.dataset.successes();
  const std::vector<Plan> attempted = s.dataset.attempted();
  PoolContext ctx{&successes, attempted};
  bool fallback = false;
  const std::vector<Plan> pool = generate_pool(cfg.strategy, ctx, s.train_blocks, s.rng, cfg.pool_size,
                                               cfg.max_length, cfg.pose_sampling, &fallback);
  const std::vector<double> scores = score_pool(cfg.strategy, s.ensemble, successes, pool);

  std::vector<ScoredPlan> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scored.push_back({pool[i], scores[i]});
  const std::vector<Plan> batch = select_batch(scored, cfg.batch_size, !is_random(cfg.strategy));

  m.pool_size = pool.size();
  m.pool_fallback = fallback;
  m.pool_score_max = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  m.pool_score_mean = scores.empty() ? 0.0 : std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  {
    // Selected scores, recomputed by position to avoid a second lookup.
    std::vector<double> sorted = scores;
    if (!is_random(cfg.strategy)) std::sort(sorted.begin(), sorted.end(), std::greater<>());
    m.batch_score_mean =
        std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cfg.batch_size), 0.0) /
        static_cast<double>(cfg.batch_size);
  }

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), s.rng);
  std::vector<LabeledPlan> results(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    results[i] = execute(batch[i], cfg.noise, s.rng);
    m.batch_feasible += results[i].overall ? 1 : 0;
  }
  // Split routing follows a shuffled order so validation is not biased to a
  // fixed score rank.
  for (std::size_t k : order) s.dataset.add_tower(results[k], cfg.model_class(), cfg.validation_fraction);

  ++s.iteration;
  const auto logs = retrain(s);
  fill_common(m, s, logs);
  return m;
}

void resume(LoopState& state, const RecordSink& sink) {
  while (state.iteration < state.config.iterations) {
    const IterationMetrics m = run_iteration(state);
    if (sink) sink(m, state);
  }
}

LoopState run(const ActiveLearnConfig& cfg, const RecordSink& sink) {
  LoopState state = initialize(cfg);
  const IterationMetrics m0 = train_initial(state);
  if (sink) sink(m0, state);
  resume(state, sink);
  return state;
}

}  // namespace apf
