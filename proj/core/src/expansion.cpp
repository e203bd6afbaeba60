#include "x3dforge/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "x3dforge/cost.hpp"
#include "x3dforge/errors.hpp"

namespace x3df {

namespace {

constexpr double kKnobMax = 4.0;
constexpr int kGridPoints = 64;
constexpr double kPostRoundingTolerance = 0.2;  // feasibility band around target

double log_ratio(std::int64_t achieved, std::int64_t target) {
  return std::abs(std::log(static_cast<double>(achieved) /
                           static_cast<double>(target)));
}

int tie_break_rank(const std::vector<Axis>& order, Axis axis) {
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == axis) return static_cast<int>(i);
  }
  return static_cast<int>(order.size()) + static_cast<int>(axis);
}

}  // namespace

std::vector<std::string> validate_settings(const ExpansionSettings& s) {
  std::vector<std::string> out;
  if (!(s.c_hat > 1.0)) out.push_back("c_hat must be > 1");
  if (!(s.epsilon > 0.0 && s.epsilon < 0.5)) {
    out.push_back("epsilon must be in (0, 0.5)");
  }
  if (s.enabled_axes.empty()) out.push_back("at least one axis must be enabled");
  if (s.max_steps < 0) out.push_back("max_steps must be >= 0");
  return out;
}

CostFns make_cost_fns(const ArchConfig& config) {
  CostFns fns;
  fns.flops = [config](const ExpansionFactors& f) {
    return count_flops(instantiate(f, config));
  };
  fns.params = [config](const ExpansionFactors& f) {
    return count_params(instantiate(f, config));
  };
  return fns;
}

ExpansionFactors apply_axis(const ExpansionFactors& factors, Axis axis,
                            double knob) {
  if (!(knob >= 1.0)) {
    throw ValidationError("expansion knob must be >= 1");
  }
  ExpansionFactors out = factors;
  if (knob == 1.0) return out;
  switch (axis) {
    case Axis::kFast:
      if (factors.gamma_tau / knob < 0.5 - 1e-12) {
        throw InfeasibleError(
            "fast expansion would push the integer sampling stride below 1");
      }
      out.gamma_tau = factors.gamma_tau / knob;
      out.gamma_t = factors.gamma_t * knob;
      break;
    case Axis::kTemporal:
      // Nominal point: frame rate x4/3 and duration x3/2 at knob 2,
      // interpolated geometrically in between.
      out.gamma_t = factors.gamma_t * knob;
      out.gamma_tau = factors.gamma_tau * std::pow(0.75, std::log2(knob));
      break;
    case Axis::kSpatial:
      out.gamma_s = factors.gamma_s * std::sqrt(knob);
      out.resolution_override = 0;  // any preset override is resolution-bound
      break;
    case Axis::kWidth:
      out.gamma_w = factors.gamma_w * knob;
      break;
    case Axis::kBottleneck:
      out.gamma_b = factors.gamma_b * knob;
      break;
    case Axis::kDepth:
      out.gamma_d = factors.gamma_d * knob;
      break;
  }
  out.cumulative[static_cast<int>(axis)] *= knob;
  return out;
}

KnobSolution solve_knob(const ExpansionFactors& factors, Axis axis,
                        std::int64_t target_cost, const CostFn& costfn) {
  const std::int64_t base_cost = costfn(factors);
  if (target_cost <= base_cost) {
    throw ValidationError("solve_knob target must exceed the current cost");
  }

  double knob_max = kKnobMax;
  if (axis == Axis::kFast) {
    // Keep the integer stride at 1 or above.
    knob_max = std::min(knob_max, factors.gamma_tau / 0.5);
    if (knob_max <= 1.0) {
      throw InfeasibleError(
          "fast axis infeasible: sampling stride would fall below 1");
    }
  }

  auto cost_at = [&](double knob) {
    return costfn(apply_axis(factors, axis, knob));
  };

  // Coarse geometric grid.
  double best_knob = 1.0;
  std::int64_t best_cost = base_cost;
  double best_obj = log_ratio(base_cost, target_cost);
  double below_knob = 1.0;   // largest grid knob with cost < target
  double above_knob = 0.0;   // smallest grid knob with cost >= target
  for (int i = 1; i < kGridPoints; ++i) {
    const double knob =
        std::pow(knob_max, static_cast<double>(i) / (kGridPoints - 1));
    const std::int64_t cost = cost_at(knob);
    const double obj = log_ratio(cost, target_cost);
    if (obj < best_obj) {
      best_obj = obj;
      best_knob = knob;
      best_cost = cost;
    }
    if (cost < target_cost) {
      below_knob = knob;
    } else if (above_knob == 0.0) {
      above_knob = knob;
    }
  }

  // Refine across the target boundary: the discrete cost steps make the
  // crossing the only place where the objective can improve.
  if (above_knob > 0.0) {
    double lo = below_knob;
    double hi = above_knob;
    for (int iter = 0; iter < 60 && hi - lo > 1e-9 * hi; ++iter) {
      const double mid = std::sqrt(lo * hi);
      if (cost_at(mid) >= target_cost) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    const std::int64_t lo_cost = cost_at(lo);
    const std::int64_t hi_cost = cost_at(hi);
    if (lo > 1.0 && log_ratio(lo_cost, target_cost) < best_obj) {
      best_obj = log_ratio(lo_cost, target_cost);
      best_knob = lo;
      best_cost = lo_cost;
    }
    // Strict improvement keeps the tie on the smaller knob.
    if (log_ratio(hi_cost, target_cost) < best_obj) {
      best_obj = log_ratio(hi_cost, target_cost);
      best_knob = hi;
      best_cost = hi_cost;
    }
  }

  const double rel = std::abs(static_cast<double>(best_cost) -
                              static_cast<double>(target_cost)) /
                     static_cast<double>(target_cost);
  if (best_knob <= 1.0 || rel > kPostRoundingTolerance) {
    throw InfeasibleError(
        std::string("axis ") + std::string(axis_name(axis)) +
        " cannot reach target cost " + std::to_string(target_cost) +
        "; best achievable " + std::to_string(best_cost) + " at knob " +
        std::to_string(best_knob));
  }
  return {best_knob, best_cost};
}

namespace {

struct AxisOutcome {
  bool ok = false;
  CandidateEval eval;
  std::string error;
};

AxisOutcome evaluate_axis(const ExpansionFactors& current, Axis axis,
                          std::int64_t step_target, const ScoreFn& criterion,
                          const CostFns& cost) {
  AxisOutcome out;
  try {
    const KnobSolution sol = solve_knob(current, axis, step_target, cost.flops);
    CandidateEval eval;
    eval.knob = sol.knob;
    eval.cost = sol.achieved_cost;
    eval.factors = apply_axis(current, axis, sol.knob);
    eval.params = cost.params(eval.factors);
    eval.score = criterion(eval.factors);
    out.ok = true;
    out.eval = eval;
  } catch (const InfeasibleError& e) {
    out.error = e.what();
  } catch (const CriterionError& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

Trajectory forward_expand(const ExpansionFactors& start,
                          std::int64_t target_cost, const ScoreFn& criterion,
                          const CostFns& cost, const ExpansionSettings& settings,
                          const std::string& criterion_id,
                          const StepHook& step_hook, int threads) {
  if (auto bad = validate_settings(settings); !bad.empty()) {
    throw ValidationError("invalid expansion settings: " + bad.front());
  }
  Trajectory traj;
  traj.start = start;
  traj.settings = settings;
  traj.criterion_id = criterion_id;
  traj.start_cost = cost.flops(start);
  traj.start_params = cost.params(start);
  traj.start_score = criterion(start);
  if (traj.start_cost >= target_cost) {
    throw ValidationError("target cost must exceed the start cost");
  }

  ExpansionFactors current = start;
  std::int64_t current_cost = traj.start_cost;

  while (current_cost < target_cost &&
         static_cast<int>(traj.steps.size()) < settings.max_steps) {
    const std::int64_t step_target = static_cast<std::int64_t>(
        std::llround(settings.c_hat * static_cast<double>(current_cost)));

    std::vector<Axis> axes;
    const bool single_frame = resolve_input_geometry(current).frames == 1;
    const auto& enabled = settings.enabled_axes;
    const bool temporal_enabled =
        std::find(enabled.begin(), enabled.end(), Axis::kTemporal) !=
        enabled.end();
    for (Axis axis : enabled) {
      // From a single frame, growing the frame rate and growing the clip
      // are the same move; the temporal candidate stands in for both.
      if (axis == Axis::kFast && single_frame && temporal_enabled) continue;
      axes.push_back(axis);
    }

    std::vector<AxisOutcome> outcomes(axes.size());
    if (threads > 1 && axes.size() > 1) {
      std::vector<std::future<AxisOutcome>> futures;
      futures.reserve(axes.size());
      for (Axis axis : axes) {
        futures.push_back(std::async(std::launch::async, evaluate_axis,
                                     current, axis, step_target, criterion,
                                     cost));
      }
      for (std::size_t i = 0; i < futures.size(); ++i) {
        outcomes[i] = futures[i].get();
      }
    } else {
      for (std::size_t i = 0; i < axes.size(); ++i) {
        outcomes[i] =
            evaluate_axis(current, axes[i], step_target, criterion, cost);
      }
    }

    ExpansionStep step;
    bool have_choice = false;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const Axis axis = axes[i];
      if (!outcomes[i].ok) {
        step.skipped[axis] = outcomes[i].error;
        continue;
      }
      const CandidateEval& eval = outcomes[i].eval;
      step.candidates[axis] = eval;
      bool better = false;
      if (!have_choice) {
        better = true;
      } else if (eval.score != step.score) {
        better = eval.score > step.score;
      } else if (eval.params != step.params) {
        better = eval.params < step.params;
      } else {
        better = tie_break_rank(settings.tie_break, axis) <
                 tie_break_rank(settings.tie_break, step.axis);
      }
      if (better) {
        step.axis = axis;
        step.knob = eval.knob;
        step.factors_after = eval.factors;
        step.cost_flops = eval.cost;
        step.params = eval.params;
        step.score = eval.score;
        have_choice = true;
      }
    }
    if (!have_choice) {
      std::string detail;
      for (const auto& [axis, why] : step.skipped) {
        detail += "\n  " + std::string(axis_name(axis)) + ": " + why;
      }
      throw InfeasibleError("expansion step " +
                            std::to_string(traj.steps.size() + 1) +
                            ": every axis failed" + detail);
    }
    traj.steps.push_back(step);
    if (step_hook) step_hook(traj.steps.back());
    current = step.factors_after;
    current_cost = step.cost_flops;
  }
  return traj;
}

ExpansionFactors backward_contract(const Trajectory& trajectory,
                                   std::int64_t target_cost,
                                   const CostFn& costfn, double epsilon) {
  if (trajectory.steps.empty()) {
    throw InfeasibleError("cannot contract an empty trajectory");
  }
  const ExpansionStep& last = trajectory.steps.back();
  if (target_cost >= last.cost_flops) {
    return last.factors_after;  // nothing to reduce
  }
  const std::size_t n = trajectory.steps.size();
  const ExpansionFactors& prev_factors =
      n >= 2 ? trajectory.steps[n - 2].factors_after : trajectory.start;
  const std::int64_t prev_cost =
      n >= 2 ? trajectory.steps[n - 2].cost_flops : trajectory.start_cost;
  if (target_cost < prev_cost) {
    throw InfeasibleError(
        "contraction target " + std::to_string(target_cost) +
        " is below the previous step cost " + std::to_string(prev_cost));
  }

  const std::int64_t bound = static_cast<std::int64_t>(
      std::floor(static_cast<double>(target_cost) * (1.0 + epsilon)));
  // Monotone cost in the knob: keep the largest knob that stays under the
  // target; the epsilon slack only forgives discrete boundary overshoot.
  double lo = 1.0;
  double hi = last.knob;
  for (int iter = 0; iter < 60 && hi - lo > 1e-12 * hi; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const std::int64_t cost = costfn(apply_axis(prev_factors, last.axis, mid));
    if (cost > target_cost) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  ExpansionFactors contracted = apply_axis(prev_factors, last.axis, lo);
  const std::int64_t achieved = costfn(contracted);
  if (achieved > bound) {
    throw InfeasibleError("contraction could not reach the target band");
  }
  return contracted;
}

std::int64_t regime_bound(Regime regime) {
  switch (regime) {
    case Regime::kXS: return 600'000'000;
    case Regime::kS: return 2'000'000'000;
    case Regime::kM: return 5'000'000'000;
    case Regime::kL: return 20'000'000'000;
    case Regime::kXL: return 40'000'000'000;
    case Regime::kXXL: return 150'000'000'000;
  }
  return 0;
}

std::string_view regime_name(Regime regime) {
  switch (regime) {
    case Regime::kXS: return "XS";
    case Regime::kS: return "S";
    case Regime::kM: return "M";
    case Regime::kL: return "L";
    case Regime::kXL: return "XL";
    case Regime::kXXL: return "XXL";
  }
  return "?";
}

std::optional<Regime> regime_from_name(std::string_view name) {
  for (Regime r : {Regime::kXS, Regime::kS, Regime::kM, Regime::kL,
                   Regime::kXL, Regime::kXXL}) {
    if (regime_name(r) == name) return r;
  }
  return std::nullopt;
}

ExpansionFactors select_instance(const Trajectory& trajectory, Regime regime,
                                 const CostFn& costfn, double epsilon) {
  if (trajectory.steps.empty()) {
    throw InfeasibleError("cannot select from an empty trajectory");
  }
  const std::int64_t bound = regime_bound(regime);
  if (bound < trajectory.start_cost) {
    throw InfeasibleError("regime bound " + std::to_string(bound) +
                          " is below the trajectory start cost " +
                          std::to_string(trajectory.start_cost));
  }
  // Last point with cost <= bound; kept == -1 means the start point.
  int kept = -1;
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    if (trajectory.steps[i].cost_flops <= bound) {
      kept = static_cast<int>(i);
    }
  }
  const std::int64_t kept_cost =
      kept < 0 ? trajectory.start_cost : trajectory.steps[kept].cost_flops;
  const bool has_next =
      kept + 1 < static_cast<int>(trajectory.steps.size());
  if (!has_next || kept_cost == bound) {
    return kept < 0 ? trajectory.start : trajectory.steps[kept].factors_after;
  }
  // The next point overshoots and there is room above the kept point:
  // contract the overshooting step down to the bound.
  Trajectory truncated = trajectory;
  truncated.steps.resize(kept + 2);
  return backward_contract(truncated, bound, costfn, epsilon);
}

}  // namespace x3df
