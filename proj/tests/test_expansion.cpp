#include <doctest.h>

#include <cmath>
#include <set>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/criterion.hpp"
#include "x3dforge/errors.hpp"
#include "x3dforge/expansion.hpp"
#include "x3dforge/io.hpp"
#include "x3dforge/rng.hpp"

using namespace x3df;

namespace {

ExpansionFactors unit_factors() { return {}; }

// Continuous synthetic cost: linear in gamma_t, ignores everything else.
CostFn linear_gamma_t_cost(double scale) {
  return [scale](const ExpansionFactors& f) {
    return static_cast<std::int64_t>(std::llround(scale * f.gamma_t));
  };
}

}  // namespace

TEST_SUITE_BEGIN("expansion");

TEST_CASE("apply_axis: fast doubles the frame rate at constant duration") {
  const ExpansionFactors out = apply_axis(unit_factors(), Axis::kFast, 2.0);
  CHECK(out.gamma_tau == doctest::Approx(0.5));
  CHECK(out.gamma_t == doctest::Approx(2.0));
  CHECK(out.gamma_t * out.gamma_tau ==
        doctest::Approx(1.0));  // duration unchanged
  CHECK(out.cumulative_for(Axis::kFast) == doctest::Approx(2.0));
}

TEST_CASE("apply_axis: temporal nominal point") {
  const ExpansionFactors out =
      apply_axis(unit_factors(), Axis::kTemporal, 2.0);
  CHECK(out.gamma_t == doctest::Approx(2.0));
  CHECK(out.gamma_tau == doctest::Approx(0.75));
}

TEST_CASE("apply_axis: unit knob is the identity") {
  ExpansionFactors f = preset_factors("X3D-XL");
  for (Axis axis : kAllAxes) {
    CHECK(apply_axis(f, axis, 1.0) == f);
  }
}

TEST_CASE("apply_axis: remaining axes scale their factor") {
  const ExpansionFactors s = apply_axis(unit_factors(), Axis::kSpatial, 2.0);
  CHECK(s.gamma_s == doctest::Approx(std::sqrt(2.0)));
  const ExpansionFactors w = apply_axis(unit_factors(), Axis::kWidth, 1.5);
  CHECK(w.gamma_w == doctest::Approx(1.5));
  const ExpansionFactors b =
      apply_axis(unit_factors(), Axis::kBottleneck, 2.25);
  CHECK(b.gamma_b == doctest::Approx(2.25));
  const ExpansionFactors d = apply_axis(unit_factors(), Axis::kDepth, 2.2);
  CHECK(d.gamma_d == doctest::Approx(2.2));
}

TEST_CASE("apply_axis: fast keeps the clip duration at any start and knob") {
  Rng rng(606);
  for (int trial = 0; trial < 50; ++trial) {
    ExpansionFactors f;
    f.gamma_tau = 1.0 + rng.next_unit() * 7.0;
    f.gamma_t = 1.0 + rng.next_unit() * 15.0;
    const double knob = 1.0 + rng.next_unit() * (f.gamma_tau / 0.5 - 1.0);
    const ExpansionFactors out = apply_axis(f, Axis::kFast, knob);
    CHECK(out.gamma_t * out.gamma_tau ==
          doctest::Approx(f.gamma_t * f.gamma_tau).epsilon(1e-12));
  }
}

TEST_CASE("forward_expand honors a restricted axis set") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [&params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  ExpansionSettings settings;
  settings.enabled_axes = {Axis::kTemporal, Axis::kDepth};
  settings.max_steps = 4;
  const Trajectory traj = forward_expand(unit_factors(), 400'000'000, score,
                                         cost, settings, "analytic");
  REQUIRE_FALSE(traj.steps.empty());
  for (const ExpansionStep& step : traj.steps) {
    CHECK((step.axis == Axis::kTemporal || step.axis == Axis::kDepth));
    for (const auto& [axis, eval] : step.candidates) {
      CHECK((axis == Axis::kTemporal || axis == Axis::kDepth));
    }
  }
}

TEST_CASE("apply_axis: fast fails when the stride would collapse") {
  ExpansionFactors f;
  f.gamma_tau = 0.8;
  CHECK_THROWS_AS(apply_axis(f, Axis::kFast, 2.0), InfeasibleError);
  CHECK_NOTHROW(apply_axis(f, Axis::kFast, 1.6));  // lands exactly at 0.5
}

TEST_CASE("apply_axis: spatial expansion drops a preset resolution override") {
  const ExpansionFactors xl = preset_factors("X3D-XL");
  REQUIRE(xl.resolution_override == 312);
  const ExpansionFactors wider = apply_axis(xl, Axis::kSpatial, 1.3);
  CHECK(wider.resolution_override == 0);
  const ExpansionFactors deeper = apply_axis(xl, Axis::kDepth, 1.3);
  CHECK(deeper.resolution_override == 312);
}

TEST_CASE("solve_knob: continuous monotone cost lands exactly") {
  const CostFn cost = linear_gamma_t_cost(1e6);
  const KnobSolution sol =
      solve_knob(unit_factors(), Axis::kTemporal, 2'000'000, cost);
  CHECK(sol.knob == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.achieved_cost == 2'000'000);
}

TEST_CASE("solve_knob: bottleneck from the base doubles to ~41.4M") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const std::int64_t base = cost.flops(unit_factors());
  const KnobSolution sol =
      solve_knob(unit_factors(), Axis::kBottleneck, 2 * base, cost.flops);
  CHECK(std::abs(sol.achieved_cost / 41.4e6 - 1.0) < 0.05);
}

TEST_CASE("solve_knob: every axis meets the first doubling within 10%") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  for (Axis axis : kAllAxes) {
    const KnobSolution sol =
        solve_knob(unit_factors(), axis, 41'400'000, cost.flops);
    CHECK(std::abs(sol.achieved_cost / 41.4e6 - 1.0) <= 0.10);
  }
}

TEST_CASE("solve_knob: unreachable target reports infeasible") {
  const CostFn flat = [](const ExpansionFactors&) {
    return static_cast<std::int64_t>(1'000'000);
  };
  CHECK_THROWS_AS(
      solve_knob(unit_factors(), Axis::kTemporal, 2'000'000, flat),
      InfeasibleError);
  CHECK_THROWS_AS(
      solve_knob(unit_factors(), Axis::kTemporal, 500'000, flat),
      ValidationError);  // target below current cost
}

TEST_CASE("forward_expand: analytic run doubles cost step by step") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [&params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  ExpansionSettings settings;
  const Trajectory traj = forward_expand(unit_factors(), 600'000'000, score,
                                         cost, settings, "analytic");
  CHECK(traj.steps.size() == 5);  // 20.67M doubles into the 0.6G regime
  std::int64_t prev = traj.start_cost;
  double prev_score = traj.start_score;
  for (const ExpansionStep& step : traj.steps) {
    const double ratio = static_cast<double>(step.cost_flops) / prev;
    CHECK(ratio >= 1.6);
    CHECK(ratio <= 2.4);
    CHECK(step.cost_flops > prev);
    CHECK(step.score > prev_score);  // analytic oracle is strictly increasing
    prev = step.cost_flops;
    prev_score = step.score;
    // Greedy argmax invariance, recoverable from the record alone.
    for (const auto& [axis, eval] : step.candidates) {
      CHECK(step.score >= eval.score);
    }
    CHECK(step.candidates.at(step.axis).score == step.score);
  }
  // First step from a single frame merges fast into temporal.
  CHECK(traj.steps[0].candidates.count(Axis::kFast) == 0);
  CHECK(traj.steps[0].axis == Axis::kBottleneck);
}

TEST_CASE("forward_expand: rigged oracle always picks depth") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn depth_lover = [](const ExpansionFactors& f) {
    return f.cumulative_for(Axis::kDepth);
  };
  ExpansionSettings settings;
  settings.max_steps = 3;
  const Trajectory traj = forward_expand(unit_factors(), 1'000'000'000,
                                         depth_lover, cost, settings, "rig");
  REQUIRE(traj.steps.size() == 3);
  for (const ExpansionStep& step : traj.steps) {
    CHECK(step.axis == Axis::kDepth);
  }
}

TEST_CASE("forward_expand: replay table drives the argmax sequence") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  ExpansionSettings settings;
  settings.max_steps = 2;
  const std::int64_t target = 100'000'000;  // two doublings from 20.67M

  // Pass 1: probe with a constant criterion to discover the step-1
  // candidate keys.
  std::set<std::string> step1_keys;
  {
    const ScoreFn probe = [&](const ExpansionFactors& f) {
      step1_keys.insert(ReplayTable::canonical_key(f));
      return 0.0;
    };
    ExpansionSettings one_step = settings;
    one_step.max_steps = 1;
    forward_expand(unit_factors(), target, probe, cost, one_step, "probe");
  }
  step1_keys.erase(ReplayTable::canonical_key(unit_factors()));

  // Winner of step 1: the spatial candidate.
  const std::string spatial_key = [&] {
    for (const std::string& key : step1_keys) {
      ExpansionFactors f;  // keys are 6-decimal canonical gammas
      std::sscanf(key.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &f.gamma_tau,
                  &f.gamma_t, &f.gamma_s, &f.gamma_w, &f.gamma_b, &f.gamma_d);
      if (f.gamma_s > 1.0) return key;
    }
    return std::string{};
  }();
  REQUIRE_FALSE(spatial_key.empty());

  // Pass 2: probe step 2 with step-1 scores fixed.
  std::set<std::string> step2_keys;
  {
    const ScoreFn probe = [&](const ExpansionFactors& f) {
      const std::string key = ReplayTable::canonical_key(f);
      if (key == spatial_key) return 1.0;
      if (step1_keys.count(key) ||
          key == ReplayTable::canonical_key(unit_factors())) {
        return 0.0;
      }
      step2_keys.insert(key);
      return 0.0;
    };
    forward_expand(unit_factors(), target, probe, cost, settings, "probe2");
  }

  // Hand-build the table: spatial wins step 1, depth wins step 2.
  std::string csv = "gamma_tau,gamma_t,gamma_s,gamma_w,gamma_b,gamma_d,score\n";
  csv += ReplayTable::canonical_key(unit_factors()) + ",0.0\n";
  for (const std::string& key : step1_keys) {
    csv += key + (key == spatial_key ? ",0.9\n" : ",0.1\n");
  }
  std::string depth_key;
  for (const std::string& key : step2_keys) {
    ExpansionFactors f;
    std::sscanf(key.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &f.gamma_tau,
                &f.gamma_t, &f.gamma_s, &f.gamma_w, &f.gamma_b, &f.gamma_d);
    const bool is_depth = f.gamma_d > 1.0;
    if (is_depth) depth_key = key;
    csv += key + (is_depth ? ",0.95\n" : ",0.2\n");
  }
  REQUIRE_FALSE(depth_key.empty());

  const ReplayTable table = ReplayTable::from_csv_text(csv);
  const ScoreFn replay_score = [&table](const ExpansionFactors& f) {
    return table.lookup(f);
  };
  const Trajectory traj = forward_expand(unit_factors(), target, replay_score,
                                         cost, settings, "replay");
  REQUIRE(traj.steps.size() == 2);
  CHECK(traj.steps[0].axis == Axis::kSpatial);
  CHECK(traj.steps[1].axis == Axis::kDepth);
  // The recorded winners are the table argmax, verified exhaustively.
  CHECK(ReplayTable::canonical_key(traj.steps[0].factors_after) ==
        spatial_key);
  CHECK(ReplayTable::canonical_key(traj.steps[1].factors_after) == depth_key);
}

TEST_CASE("forward_expand: a failing axis is excluded, all failing aborts") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn no_bottleneck = [](const ExpansionFactors& f) {
    if (f.gamma_b != 1.0) throw CriterionError("bottleneck rejected");
    return f.cumulative_for(Axis::kDepth);
  };
  ExpansionSettings settings;
  settings.max_steps = 1;
  const Trajectory traj = forward_expand(unit_factors(), 100'000'000,
                                         no_bottleneck, cost, settings, "x");
  REQUIRE(traj.steps.size() == 1);
  CHECK(traj.steps[0].candidates.count(Axis::kBottleneck) == 0);
  CHECK(traj.steps[0].skipped.count(Axis::kBottleneck) == 1);

  const ScoreFn always_fails = [](const ExpansionFactors& f) -> double {
    if (f == ExpansionFactors{}) return 0.0;  // allow the start evaluation
    throw CriterionError("nope");
  };
  CHECK_THROWS_AS(forward_expand(unit_factors(), 100'000'000, always_fails,
                                 cost, settings, "x"),
                  InfeasibleError);
}

TEST_CASE("forward_expand: score ties fall to fewer parameters") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn constant = [](const ExpansionFactors&) { return 0.5; };
  ExpansionSettings settings;
  settings.max_steps = 1;
  const Trajectory traj = forward_expand(unit_factors(), 100'000'000,
                                         constant, cost, settings, "tie");
  REQUIRE(traj.steps.size() == 1);
  const ExpansionStep& step = traj.steps[0];
  std::int64_t fewest = step.params;
  for (const auto& [axis, eval] : step.candidates) {
    fewest = std::min(fewest, eval.params);
  }
  CHECK(step.params == fewest);
}

TEST_CASE("forward_expand: residual ties follow the configured axis order") {
  // Equal scores and equal params: force it by pinning params too.
  const CostFns real = make_cost_fns(ArchConfig{});
  CostFns rigged = real;
  rigged.params = [](const ExpansionFactors&) {
    return static_cast<std::int64_t>(1);
  };
  const ScoreFn constant = [](const ExpansionFactors&) { return 0.5; };
  ExpansionSettings settings;
  settings.max_steps = 1;
  settings.tie_break = {Axis::kSpatial, Axis::kBottleneck, Axis::kTemporal,
                        Axis::kFast, Axis::kDepth, Axis::kWidth};
  const Trajectory traj = forward_expand(unit_factors(), 100'000'000,
                                         constant, rigged, settings, "tie");
  REQUIRE(traj.steps.size() == 1);
  CHECK(traj.steps[0].axis == Axis::kSpatial);
}

TEST_CASE("forward_expand: validates settings and target") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn zero = [](const ExpansionFactors&) { return 0.0; };
  ExpansionSettings bad;
  bad.c_hat = 0.9;
  CHECK_THROWS_AS(forward_expand(unit_factors(), 100'000'000, zero, cost, bad,
                                 "x"),
                  ValidationError);
  ExpansionSettings ok;
  CHECK_THROWS_AS(forward_expand(unit_factors(), 1'000'000, zero, cost, ok,
                                 "x"),
                  ValidationError);  // target below the start cost
}

TEST_CASE("forward_expand: deterministic across reruns and thread counts") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [&params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  ExpansionSettings settings;
  const Trajectory a = forward_expand(unit_factors(), 300'000'000, score,
                                      cost, settings, "analytic", {}, 1);
  const Trajectory b = forward_expand(unit_factors(), 300'000'000, score,
                                      cost, settings, "analytic", {}, 1);
  const Trajectory c = forward_expand(unit_factors(), 300'000'000, score,
                                      cost, settings, "analytic", {}, 4);
  CHECK(trajectory_to_csv(a) == trajectory_to_csv(b));
  CHECK(trajectory_to_csv(a) == trajectory_to_csv(c));
}

TEST_CASE("forward_expand: the regularization hook fires once per step") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn zero = [](const ExpansionFactors& f) {
    return f.cumulative_for(Axis::kDepth);
  };
  ExpansionSettings settings;
  settings.max_steps = 3;
  int calls = 0;
  const StepHook hook = [&calls](const ExpansionStep&) { ++calls; };
  const Trajectory traj = forward_expand(unit_factors(), 1'000'000'000, zero,
                                         cost, settings, "x", hook);
  CHECK(calls == static_cast<int>(traj.steps.size()));
}

TEST_CASE("backward_contract: closed form for a linear cost") {
  const CostFn cost = linear_gamma_t_cost(1'000'000);
  Trajectory traj;
  traj.start = unit_factors();
  traj.start_cost = 1'000'000;
  ExpansionStep step;
  step.axis = Axis::kTemporal;
  step.knob = 2.0;
  step.factors_after = apply_axis(traj.start, Axis::kTemporal, 2.0);
  step.cost_flops = 2'000'000;
  traj.steps.push_back(step);

  const ExpansionFactors out = backward_contract(traj, 1'500'000, cost);
  CHECK(out.gamma_t == doctest::Approx(1.5).epsilon(1e-4));
  CHECK(cost(out) <= 1'575'000);  // within target * (1 + epsilon)
  CHECK(cost(out) > 1'000'000);

  // Target at the last-step cost: nothing changes.
  const ExpansionFactors same = backward_contract(traj, 2'000'000, cost);
  CHECK(same == step.factors_after);

  // Target below the previous step cost: out of range.
  CHECK_THROWS_AS(backward_contract(traj, 900'000, cost), InfeasibleError);
}

TEST_CASE("backward_contract: cost lands in (previous, 1.05 * target]") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [&params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  ExpansionSettings settings;
  const Trajectory traj = forward_expand(unit_factors(), 2'000'000'000, score,
                                         cost, settings, "analytic");
  REQUIRE(traj.steps.size() >= 2);
  const std::int64_t prev_cost =
      traj.steps[traj.steps.size() - 2].cost_flops;
  const std::int64_t target = 2'000'000'000;
  REQUIRE(traj.final_cost() > target);
  const ExpansionFactors contracted =
      backward_contract(traj, target, cost.flops);
  const std::int64_t achieved = cost.flops(contracted);
  CHECK(achieved > prev_cost);
  CHECK(achieved <= static_cast<std::int64_t>(1.05 * target));
}

TEST_CASE("select_instance: picks, contracts, and rejects") {
  // Linear synthetic trajectory: cost = 0.2 GFLOPs * gamma_t.
  const CostFn cost = linear_gamma_t_cost(200'000'000);
  Trajectory traj;
  traj.start = unit_factors();
  traj.start_cost = 200'000'000;
  ExpansionFactors f = traj.start;
  for (double knob : {2.0, 2.0}) {
    ExpansionStep step;
    step.axis = Axis::kTemporal;
    step.knob = knob;
    step.factors_after = apply_axis(f, Axis::kTemporal, knob);
    step.cost_flops = cost(step.factors_after);
    traj.steps.push_back(step);
    f = step.factors_after;
  }
  REQUIRE(traj.steps[0].cost_flops == 400'000'000);
  REQUIRE(traj.steps[1].cost_flops == 800'000'000);

  // XS bound 0.6G: step 1 is kept, step 2 overshoots, contraction fills
  // the gap up to the bound.
  const ExpansionFactors xs = select_instance(traj, Regime::kXS, cost);
  CHECK(cost(xs) <= 630'000'000);
  CHECK(cost(xs) > 400'000'000);

  // Bound exactly at a step cost returns that step.
  Trajectory exact = traj;
  exact.steps[1].factors_after.gamma_t = 3.0;
  exact.steps[1].cost_flops = 600'000'000;
  const ExpansionFactors at = select_instance(exact, Regime::kXS, cost);
  CHECK(at == exact.steps[1].factors_after);

  // Bound below the start cost is an error.
  Trajectory high = traj;
  high.start_cost = 700'000'000;
  CHECK_THROWS_AS(select_instance(high, Regime::kXS, cost), InfeasibleError);
}

TEST_CASE("regime bounds and names") {
  CHECK(regime_bound(Regime::kXS) == 600'000'000);
  CHECK(regime_bound(Regime::kXXL) == 150'000'000'000);
  CHECK(regime_from_name("M") == Regime::kM);
  CHECK_FALSE(regime_from_name("tiny").has_value());
  CHECK(regime_name(Regime::kL) == "L");
}

TEST_SUITE_END();
