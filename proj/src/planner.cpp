#include "apf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace apf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double simulated(const SimulationFeasibility& sim, const Plan& plan, Rng& rng) {
  const NoiseConfig noise = NoiseConfig::gaussian(sim.sigma);
  for (int k = 0; k < sim.perturbations; ++k) {
    if (!is_constructable(perturb(plan, noise, rng))) return 0.0;
  }
  return 1.0;
}

}  // namespace

std::string model_name(const FeasibilityModel& model) {
  return std::visit(overloaded{[](const LearnedFeasibility& m) {
                                 return std::string("learned-") + to_string(m.model_class);
                               },
                               [](const AnalyticalFeasibility&) { return std::string("analytical"); },
                               [](const SimulationFeasibility&) { return std::string("simulation"); }},
                    model);
}

std::vector<double> feasibility(const FeasibilityModel& model, std::span<const Plan> plans, Rng& rng) {
  return std::visit(
      overloaded{
          [&](const LearnedFeasibility& m) {
            if (m.ensemble == nullptr) throw ConfigError("learned feasibility model has no ensemble");
            std::vector<double> out(plans.size());
            constexpr std::size_t chunk = 512;
            for (std::size_t start = 0; start < plans.size(); start += chunk) {
              const auto part = plans.subspan(start, std::min(chunk, plans.size() - start));
              if (m.model_class == ModelClass::Comp) {
                const auto probs = member_plan_probs(*m.ensemble, part);
                for (std::size_t i = 0; i < part.size(); ++i) {
                  out[start + i] = std::accumulate(probs[i].begin(), probs[i].end(), 0.0) /
                                   static_cast<double>(probs[i].size());
                }
              } else {
                const auto steps = member_step_probs(*m.ensemble, part);
                for (std::size_t i = 0; i < part.size(); ++i) out[start + i] = plan_feasibility_ss(steps[i]);
              }
            }
            return out;
          },
          [&](const AnalyticalFeasibility&) {
            std::vector<double> out(plans.size());
            for (std::size_t i = 0; i < plans.size(); ++i) out[i] = is_constructable(plans[i]) ? 1.0 : 0.0;
            return out;
          },
          [&](const SimulationFeasibility& sim) {
            std::vector<double> out(plans.size());
            for (std::size_t i = 0; i < plans.size(); ++i) out[i] = simulated(sim, plans[i], rng);
            return out;
          }},
      model);
}

double feasibility(const FeasibilityModel& model, const Plan& plan, Rng& rng) {
  return feasibility(model, std::span<const Plan>(&plan, 1), rng).front();
}

PlanningResult monte_carlo_plan(std::span<const Block> blocks, TaskObjective task, const FeasibilityModel& model,
                                std::size_t n_samples, Rng& rng, const PoseSampling& poses) {
  if (n_samples == 0) throw ConfigError("planner needs at least one sample");
  PlanningResult r;
  r.candidates.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) r.candidates.push_back(sample_plan(rng, blocks, blocks.size(), poses));
  r.feasibility = feasibility(model, r.candidates, rng);
  r.rewards.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) r.rewards[i] = reward(r.candidates[i], task);
  r.chosen = 0;
  for (std::size_t i = 1; i < n_samples; ++i) {
    if (r.value(i) > r.value(r.chosen)) r.chosen = i;
  }
  return r;
}

double normalized_regret(double best_feasible, double realized) {
  // No constructable candidate at all: nothing was achievable, nothing lost.
  if (!(best_feasible > 0)) return 0.0;
  const double r = (best_feasible - realized) / best_feasible;
  if (std::abs(r) <= 1e-12) return 0.0;
  return std::clamp(r, 0.0, 1.0);
}

EvalResult evaluate(std::span<const Block> blocks, TaskObjective task, const FeasibilityModel& model,
                    std::size_t n_samples, const NoiseConfig& noise, Rng& rng, const PoseSampling& poses) {
  const PlanningResult planned = monte_carlo_plan(blocks, task, model, n_samples, rng, poses);
  EvalResult out;
  out.chosen = planned.plan();
  out.predicted_feasibility = planned.feasibility[planned.chosen];
  for (std::size_t i = 0; i < planned.candidates.size(); ++i) {
    if (planned.rewards[i] > out.best_feasible && is_constructable(planned.candidates[i])) {
      out.best_feasible = planned.rewards[i];
    }
  }
  const LabeledPlan built = execute(out.chosen, noise, rng);
  out.realized = built.overall ? planned.rewards[planned.chosen] : 0.0;
  out.regret = normalized_regret(out.best_feasible, out.realized);
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RegretSummary summarize(std::span<const EvalResult> trials) {
  std::vector<double> r;
  r.reserve(trials.size());
  for (const auto& t : trials) r.push_back(t.regret);
  return {quantile(r, 0.5), quantile(r, 0.25), quantile(r, 0.75)};
}

SuiteResult evaluate_suite(const FeasibilityModel& model, TaskObjective task, std::span<const Block> block_pool,
                           const EvalSettings& settings, Rng& rng) {
  if (settings.trials == 0) throw ConfigError("evaluation needs at least one trial");
  if (block_pool.size() < settings.blocks_per_tower) throw ConfigError("evaluation block set is too small");
  SuiteResult out;
  std::vector<Block> pool(block_pool.begin(), block_pool.end());
  for (std::size_t t = 0; t < settings.trials; ++t) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::span<const Block> chosen(pool.data(), settings.blocks_per_tower);
    out.trials.push_back(evaluate(chosen, task, model, settings.samples, settings.noise, rng, settings.poses));
  }
  out.summary = summarize(out.trials);
  return out;
}

void write_eval_csv(std::ostream& os, std::span<const EvalResult> trials, TaskObjective task,
                    const std::string& model, bool header) {
  if (header) os << "trial,task,model,v_gt,realized,regret\n";
  char buf[128];
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", trials[i].best_feasible, trials[i].realized,
                  trials[i].regret);
    os << i << ',' << to_string(task) << ',' << model << ',' << buf << '\n';
  }
}

}  // namespace apf
