#include "apf/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace apf {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double step_bald(const Eigen::MatrixXd& steps, Eigen::Index col) {
  const Eigen::VectorXd c = steps.col(col);
  return bald(c);
}

std::vector<Plan> random_plans(Rng& rng, std::span<const Block> blocks, std::size_t count, std::size_t min_len,
                               std::size_t max_len, const PoseSampling& poses) {
  max_len = std::min(max_len, blocks.size());
  if (min_len > max_len) throw ConfigError("block set too small for the requested plan length");
  std::vector<Plan> out;
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_plan(rng, blocks, len(rng), poses));
  return out;
}

std::vector<Plan> extensions(Rng& rng, std::span<const Plan> bases, std::span<const Block> blocks, std::size_t count,
                             std::size_t max_length, const PoseSampling& poses) {
  std::vector<const Plan*> usable;
  for (const auto& b : bases) {
    if (b.size() < max_length && b.size() < blocks.size()) usable.push_back(&b);
  }
  std::vector<Plan> out;
  if (usable.empty()) return out;
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  std::vector<const Block*> free;
  for (std::size_t i = 0; i < count; ++i) {
    const Plan& base = *usable[pick(rng)];
    free.clear();
    for (const auto& b : blocks) {
      const bool used = std::any_of(base.actions.begin(), base.actions.end(),
                                    [&](const Action& a) { return a.block.id == b.id; });
      if (!used) free.push_back(&b);
    }
    const Block& next = *free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    out.push_back(extend_plan(rng, base, next, poses));
  }
  return out;
}

}  // namespace

const char* to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::Complete:
      return "complete";
    case StrategyKind::Greedy:
      return "greedy";
    case StrategyKind::Sequential:
      return "sequential";
    case StrategyKind::Incremental:
      return "incremental";
    case StrategyKind::RandomComp:
      return "random-comp";
    case StrategyKind::RandomSS:
      return "random-ss";
  }
  return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
  for (auto k : {StrategyKind::Complete, StrategyKind::Greedy, StrategyKind::Sequential, StrategyKind::Incremental,
                 StrategyKind::RandomComp, StrategyKind::RandomSS}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown strategy '" + s + "'");
}

ModelClass model_class_for(StrategyKind s) {
  return (s == StrategyKind::Complete || s == StrategyKind::RandomComp) ? ModelClass::Comp : ModelClass::SS;
}

bool is_random(StrategyKind s) { return s == StrategyKind::RandomComp || s == StrategyKind::RandomSS; }

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binary_entropy: probability outside [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double bald(std::span<const double> member_probs) {
  if (member_probs.empty()) throw std::invalid_argument("bald: empty ensemble");
  double mean_entropy = 0.0;
  for (double p : member_probs) mean_entropy += binary_entropy(p);
  mean_entropy /= static_cast<double>(member_probs.size());
  const double mean_p = std::clamp(mean_of(member_probs), 0.0, 1.0);
  // Identical members: exact zero rather than rounding noise.
  const bool unanimous = std::all_of(member_probs.begin(), member_probs.end(),
                                     [&](double p) { return p == member_probs.front(); });
  if (unanimous) return 0.0;
  return std::clamp(binary_entropy(mean_p) - mean_entropy, 0.0, std::log(2.0));
}

double bald(const Eigen::Ref<const Eigen::VectorXd>& member_probs) {
  return bald(std::span<const double>(member_probs.data(), static_cast<std::size_t>(member_probs.size())));
}

std::string plan_key(const Plan& plan) {
  std::string key;
  char buf[96];
  for (const auto& a : plan.actions) {
    std::snprintf(buf, sizeof buf, "%d:%a:%a:%d;", a.block.id, a.pose.dx, a.pose.dy, quarter_turns(a.pose.rot));
    key += buf;
  }
  return key;
}

void SuccessIndex::add(const Plan& plan) {
  if (keys_.insert(plan_key(plan)).second && plan.size() >= 2) plans_.push_back(plan);
}

bool SuccessIndex::contains(const Plan& plan) const {
  return plan.size() <= 1 || keys_.count(plan_key(plan)) > 0;
}

double score_complete(const Ensemble& ens, const Plan& plan) { return bald(member_plan_probs(ens, plan)); }

double sequential_score(const Eigen::MatrixXd& member_steps) {
  double total = 0.0;
  double attempted = 1.0;
  for (Eigen::Index i = 1; i < member_steps.cols(); ++i) {
    attempted *= member_steps.col(i - 1).mean();
    total += attempted * step_bald(member_steps, i);
  }
  return total;
}

double score_sequential(const Ensemble& ens, const Plan& plan) {
  return sequential_score(member_step_probs(ens, plan));
}

double score_incremental(const Ensemble& ens, const SuccessIndex& successes, const Plan& plan) {
  if (plan.size() <= 1) return 0.0;
  if (!successes.contains(plan.prefix(plan.size() - 1))) return 0.0;
  const Eigen::MatrixXd steps = member_step_probs(ens, plan);
  return step_bald(steps, steps.cols() - 1);
}

double score_greedy(const Ensemble& ens, const Plan& prefix, const Action& candidate) {
  Plan plan = prefix;
  plan.actions.push_back(candidate);
  if (plan.size() <= 1) return 0.0;
  const Eigen::MatrixXd steps = member_step_probs(ens, plan);
  return step_bald(steps, steps.cols() - 1);
}

std::vector<Plan> generate_pool(StrategyKind strategy, const PoolContext& ctx, std::span<const Block> blocks, Rng& rng,
                                std::size_t pool_size, std::size_t max_length, const PoseSampling& poses,
                                bool* fallback) {
  if (blocks.empty()) throw ConfigError("empty block set");
  if (pool_size == 0) throw ConfigError("pool size must be at least 1");
  if (max_length < 2) throw ConfigError("maximum plan length must be at least 2");
  if (fallback) *fallback = false;

  std::vector<Plan> pool;
  switch (strategy) {
    case StrategyKind::Complete:
    case StrategyKind::RandomComp:
    case StrategyKind::Sequential:
    case StrategyKind::RandomSS:
      return random_plans(rng, blocks, pool_size, 2, max_length, poses);
    case StrategyKind::Incremental:
      if (ctx.successes) pool = extensions(rng, ctx.successes->plans(), blocks, pool_size, max_length, poses);
      break;
    case StrategyKind::Greedy:
      pool = extensions(rng, ctx.attempted, blocks, pool_size, max_length, poses);
      break;
  }
  if (pool.empty()) {
    if (fallback) *fallback = true;
    pool = random_plans(rng, blocks, pool_size, 2, 2, poses);
  }
  return pool;
}

std::vector<double> score_pool(StrategyKind strategy, const Ensemble& ens, const SuccessIndex& successes,
                               std::span<const Plan> pool) {
  std::vector<double> scores(pool.size(), 0.0);
  if (is_random(strategy) || pool.empty()) return scores;
  if (strategy == StrategyKind::Complete) {
    const auto probs = member_plan_probs(ens, pool);
    for (std::size_t i = 0; i < pool.size(); ++i) scores[i] = bald(probs[i]);
    return scores;
  }
  const auto steps = member_step_probs(ens, pool);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Plan& plan = pool[i];
    const Eigen::Index last = steps[i].cols() - 1;
    switch (strategy) {
      case StrategyKind::Sequential:
        scores[i] = sequential_score(steps[i]);
        break;
      case StrategyKind::Incremental:
        if (plan.size() >= 2 && successes.contains(plan.prefix(plan.size() - 1))) scores[i] = step_bald(steps[i], last);
        break;
      case StrategyKind::Greedy:
        if (plan.size() >= 2) scores[i] = step_bald(steps[i], last);
        break;
      default:
        break;
    }
  }
  return scores;
}

std::vector<Plan> select_batch(std::span<const ScoredPlan> scored, std::size_t n, bool by_score) {
  if (n > scored.size()) throw ConfigError("batch size exceeds pool size");
  std::vector<std::size_t> idx(scored.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (by_score) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
  }
  std::vector<Plan> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(scored[idx[k]].plan);
  return out;
}

void write_pool_csv(std::ostream& os, StrategyKind strategy, std::span<const ScoredPlan> scored, int iteration,
                    bool header) {
  if (header) os << "iteration,plan_id,strategy,length,score\n";
  char buf[64];
  for (std::size_t i = 0; i < scored.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", scored[i].score);
    os << iteration << ',' << i << ',' << to_string(strategy) << ',' << scored[i].plan.size() << ',' << buf << '\n';
  }
}

}  // namespace apf
