#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "x3dforge/arch.hpp"

namespace x3df {

struct ExpansionSettings {
  double c_hat = 2.0;     // per-step complexity multiplier
  double epsilon = 0.05;  // relative cost-matching tolerance
  std::vector<Axis> enabled_axes{kAllAxes.begin(), kAllAxes.end()};
  // Ties on equal score and equal parameter count fall back to this order.
  std::vector<Axis> tie_break = {Axis::kBottleneck, Axis::kTemporal,
                                 Axis::kFast,       Axis::kSpatial,
                                 Axis::kDepth,      Axis::kWidth};
  int max_steps = 16;
};

std::vector<std::string> validate_settings(const ExpansionSettings& settings);

struct CandidateEval {
  double knob = 1.0;
  std::int64_t cost = 0;
  std::int64_t params = 0;
  double score = 0.0;
  ExpansionFactors factors;
};

struct ExpansionStep {
  Axis axis = Axis::kFast;
  double knob = 1.0;
  ExpansionFactors factors_after;
  std::int64_t cost_flops = 0;
  std::int64_t params = 0;
  double score = 0.0;
  std::map<Axis, CandidateEval> candidates;      // every evaluated axis
  std::map<Axis, std::string> skipped;           // axis -> failure reason
};

/// Ordered record of expansion steps. Costs are strictly increasing and
/// each consecutive ratio stays within c_hat * (1 +- 0.2).
struct Trajectory {
  ExpansionFactors start;
  std::int64_t start_cost = 0;
  std::int64_t start_params = 0;
  double start_score = 0.0;
  std::vector<ExpansionStep> steps;
  ExpansionSettings settings;
  std::string criterion_id;

  const ExpansionFactors& final_factors() const {
    return steps.empty() ? start : steps.back().factors_after;
  }
  std::int64_t final_cost() const {
    return steps.empty() ? start_cost : steps.back().cost_flops;
  }
};

using CostFn = std::function<std::int64_t(const ExpansionFactors&)>;
using ScoreFn = std::function<double(const ExpansionFactors&)>;
using StepHook = std::function<void(const ExpansionStep&)>;

struct CostFns {
  CostFn flops;
  CostFn params;
};

/// Analytical flops / params of instantiate(factors, config).
CostFns make_cost_fns(const ArchConfig& config);

/// Applies one expansion operator, scaled continuously by knob around the
/// axis nominal point, and updates the cumulative magnitude:
///   fast:       gamma_tau /= knob, gamma_t *= knob  (duration constant)
///   temporal:   gamma_t *= knob, gamma_tau *= 0.75^log2(knob)
///   spatial:    gamma_s *= sqrt(knob)
///   width:      gamma_w *= knob
///   bottleneck: gamma_b *= knob
///   depth:      gamma_d *= knob
/// knob = 1 returns the factors unchanged. Throws InfeasibleError when a
/// fast expansion would push the integer stride below 1.
ExpansionFactors apply_axis(const ExpansionFactors& factors, Axis axis,
                            double knob);

struct KnobSolution {
  double knob = 1.0;
  std::int64_t achieved_cost = 0;
};

/// Deterministic knob search: a 64-point geometric grid on [1, 4] followed
/// by bisection across the discrete cost boundary, minimizing
/// |ln(achieved / target)| with ties to the smaller knob. Throws
/// InfeasibleError (reporting the best achievable cost) when nothing lands
/// within 20% of the target.
KnobSolution solve_knob(const ExpansionFactors& factors, Axis axis,
                        std::int64_t target_cost, const CostFn& costfn);

/// Greedy coordinate descent: each step solves every enabled axis to
/// c_hat * current cost, scores the candidates, and keeps the argmax.
/// Runs until cost >= target_cost or max_steps. From a single-frame start
/// the fast and temporal axes coincide and are evaluated as one temporal
/// candidate. A failing axis is dropped from that step's argmax; the step
/// fails only if every axis fails. step_hook (when set) runs after each
/// appended step - the regularization hook point; no-op by default.
Trajectory forward_expand(const ExpansionFactors& start,
                          std::int64_t target_cost, const ScoreFn& criterion,
                          const CostFns& cost, const ExpansionSettings& settings,
                          const std::string& criterion_id = "",
                          const StepHook& step_hook = {}, int threads = 1);

/// Reduces the last expansion step: bisects its knob in (1, chosen) to the
/// largest value whose cost stays within target_cost * (1 + epsilon).
/// Requires previous-step cost <= target_cost; a target at or above the
/// last-step cost returns the final factors unchanged.
ExpansionFactors backward_contract(const Trajectory& trajectory,
                                   std::int64_t target_cost,
                                   const CostFn& costfn,
                                   double epsilon = 0.05);

enum class Regime { kXS, kS, kM, kL, kXL, kXXL };

std::int64_t regime_bound(Regime regime);  // multiply-adds
std::string_view regime_name(Regime regime);
std::optional<Regime> regime_from_name(std::string_view name);

/// Largest trajectory point not exceeding the regime bound, contracted via
/// backward_contract when the next point overshoots and the bound exceeds
/// the kept point.
ExpansionFactors select_instance(const Trajectory& trajectory, Regime regime,
                                 const CostFn& costfn, double epsilon = 0.05);

}  // namespace x3df
