#pragma once

#include "apf/domain.hpp"
#include "apf/model.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace apf {

struct LearnedFeasibility {
  const Ensemble* ensemble = nullptr;
  ModelClass model_class = ModelClass::SS;
};

/// Noiseless constructability: 1 or 0.
struct AnalyticalFeasibility {};

/// 1 iff every one of `perturbations` noisy copies is constructable.
struct SimulationFeasibility {
  int perturbations = 10;
  double sigma = 0.005;
};

using FeasibilityModel = std::variant<LearnedFeasibility, AnalyticalFeasibility, SimulationFeasibility>;

std::string model_name(const FeasibilityModel& model);

double feasibility(const FeasibilityModel& model, const Plan& plan, Rng& rng);
std::vector<double> feasibility(const FeasibilityModel& model, std::span<const Plan> plans, Rng& rng);

struct PlanningResult {
  std::vector<Plan> candidates;
  std::vector<double> feasibility;
  std::vector<double> rewards;
  std::size_t chosen = 0;

  const Plan& plan() const { return candidates[chosen]; }
  double value(std::size_t i) const { return feasibility[i] * rewards[i]; }
};

/// Samples `n_samples` towers that use every block (random order and poses)
/// and picks the first maximizer of feasibility x reward.
PlanningResult monte_carlo_plan(std::span<const Block> blocks, TaskObjective task, const FeasibilityModel& model,
                                std::size_t n_samples, Rng& rng, const PoseSampling& poses = {});

struct EvalResult {
  Plan chosen;
  double predicted_feasibility = 0.0;
  double realized = 0.0;      ///< reward of the executed tower, 0 if it fell
  double best_feasible = 0.0; ///< best analytically constructable candidate
  double regret = 0.0;        ///< (best - realized) / best, in [0, 1]
};

double normalized_regret(double best_feasible, double realized);

EvalResult evaluate(std::span<const Block> blocks, TaskObjective task, const FeasibilityModel& model,
                    std::size_t n_samples, const NoiseConfig& noise, Rng& rng, const PoseSampling& poses = {});

struct RegretSummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);
RegretSummary summarize(std::span<const EvalResult> trials);

struct SuiteResult {
  std::vector<EvalResult> trials;
  RegretSummary summary;
};

struct EvalSettings {
  std::size_t trials = 50;
  std::size_t samples = 2000;
  std::size_t blocks_per_tower = 5;
  NoiseConfig noise;
  PoseSampling poses;
};

/// Repeats `evaluate` on fresh draws of blocks from `block_pool`.
SuiteResult evaluate_suite(const FeasibilityModel& model, TaskObjective task, std::span<const Block> block_pool,
                           const EvalSettings& settings, Rng& rng);

void write_eval_csv(std::ostream& os, std::span<const EvalResult> trials, TaskObjective task,
                    const std::string& model, bool header = true);

}  // namespace apf
