#pragma once

#include "apf/domain.hpp"
#include "apf/model.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace apf {

enum class StrategyKind { Complete, Greedy, Sequential, Incremental, RandomComp, RandomSS };

const char* to_string(StrategyKind s);
StrategyKind strategy_from_string(const std::string& s);

/// Model class a strategy trains: Complete and RandomComp use whole-plan
/// labels, the rest per-step labels.
ModelClass model_class_for(StrategyKind s);
bool is_random(StrategyKind s);

struct ScoredPlan {
  Plan plan;
  double score = 0.0;  // nats
};

/// Entropy of a Bernoulli(p) in nats. Throws std::domain_error outside [0, 1].
double binary_entropy(double p);

/// Mutual information between the label and the ensemble member:
/// H(mean p) - mean H(p).
double bald(std::span<const double> member_probs);
double bald(const Eigen::Ref<const Eigen::VectorXd>& member_probs);

/// Canonical text key of a plan, exact in every double.
std::string plan_key(const Plan& plan);

/// Plans observed to succeed at every step, for the incremental indicator and
/// for generating one-step extensions.
class SuccessIndex {
 public:
  void add(const Plan& plan);
  bool contains(const Plan& plan) const;
  /// Extension bases: successful plans of length >= 2, in insertion order.
  const std::vector<Plan>& plans() const { return plans_; }
  std::size_t size() const { return plans_.size(); }

 private:
  std::unordered_set<std::string> keys_;
  std::vector<Plan> plans_;
};

double score_complete(const Ensemble& ens, const Plan& plan);

/// Attempt-weighted sum of per-step BALD from an N x n member step matrix.
/// Weights use the ensemble-mean probability that the prefix succeeded.
double sequential_score(const Eigen::MatrixXd& member_steps);
double score_sequential(const Ensemble& ens, const Plan& plan);

/// BALD of the final step if the prefix is a known success (length-1
/// prefixes always are), else 0.
double score_incremental(const Ensemble& ens, const SuccessIndex& successes, const Plan& plan);
double score_greedy(const Ensemble& ens, const Plan& prefix, const Action& candidate);

/// Pool sources that depend on the data collected so far.
struct PoolContext {
  const SuccessIndex* successes = nullptr;
  /// Every plan executed so far (greedy extends these optimistically).
  std::span<const Plan> attempted;
};

/// Candidate experiments for a strategy. `fallback` is set when an extension
/// strategy had nothing to extend and produced random 2-block plans instead.
std::vector<Plan> generate_pool(StrategyKind strategy, const PoolContext& ctx, std::span<const Block> blocks, Rng& rng,
                                std::size_t pool_size, std::size_t max_length, const PoseSampling& poses = {},
                                bool* fallback = nullptr);

/// Scores a whole pool with batched forward passes.
std::vector<double> score_pool(StrategyKind strategy, const Ensemble& ens, const SuccessIndex& successes,
                               std::span<const Plan> pool);

/// Top-n by score, ties to the earlier index. Random strategies pass
/// `by_score = false` to take the first n.
std::vector<Plan> select_batch(std::span<const ScoredPlan> scored, std::size_t n, bool by_score = true);

void write_pool_csv(std::ostream& os, StrategyKind strategy, std::span<const ScoredPlan> scored, int iteration = 0,
                    bool header = true);

}  // namespace apf
