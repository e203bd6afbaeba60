#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/criterion.hpp"
#include "x3dforge/errors.hpp"
#include "x3dforge/expansion.hpp"
#include "x3dforge/io.hpp"

using namespace x3df;

namespace {

Trajectory analytic_trajectory(std::int64_t target) {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  return forward_expand(ExpansionFactors{}, target, score, cost,
                        ExpansionSettings{}, "analytic");
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("spec documents round-trip exactly") {
  for (const std::string& name : preset_names()) {
    const ArchSpec spec = instantiate(preset_factors(name));
    const std::string text = spec_to_text(spec);
    const ArchSpec loaded = spec_from_text(text);
    CHECK(loaded == spec);
    CHECK(spec_to_text(loaded) == text);
  }
  ArchConfig config;
  config.use_channelwise = false;
  config.se_every = 3;
  config.num_classes = 101;
  ExpansionFactors f = preset_factors("X3D-S");
  f.cumulative[2] = 1.75;
  const ArchSpec custom = instantiate(f, config);
  CHECK(spec_from_text(spec_to_text(custom)) == custom);
}

TEST_CASE("spec document carries the documented field names") {
  const std::string text = spec_to_text(instantiate(preset_factors("X3D-M")));
  for (const char* field :
       {"input.frames 16", "input.stride 5", "input.resolution 224",
        "conv1.width 24", "stages[0].blocks 3", "stages[0].out_width 24",
        "stages[0].bottleneck_width 54", "head.conv5_width 432",
        "head.fc1_width 2048", "head.classes 400"}) {
    CHECK(text.find(field) != std::string::npos);
  }
}

TEST_CASE("spec file save and load") {
  const auto path = temp_path("x3dforge_spec_roundtrip.txt");
  const ArchSpec spec = instantiate(preset_factors("X3D-XL"));
  save_spec(spec, path.string());
  CHECK(load_spec(path.string()) == spec);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_spec(path.string()), ValidationError);
}

TEST_CASE("malformed spec documents are rejected") {
  CHECK_THROWS_AS(spec_from_text(""), ValidationError);
  CHECK_THROWS_AS(spec_from_text("bogus.header.v9\n"), ValidationError);
  CHECK_THROWS_AS(spec_from_text("x3dforge.spec.v1\ninput.frames 16\n"),
                  ValidationError);  // everything else missing
}

TEST_CASE("trajectory CSV round-trips byte for byte") {
  const Trajectory traj = analytic_trajectory(300'000'000);
  const std::string csv = trajectory_to_csv(traj);
  const Trajectory loaded = trajectory_from_csv(csv);
  CHECK(trajectory_to_csv(loaded) == csv);

  CHECK(loaded.steps.size() == traj.steps.size());
  CHECK(loaded.start_cost == traj.start_cost);
  CHECK(loaded.criterion_id == traj.criterion_id);
  CHECK(loaded.settings.c_hat == traj.settings.c_hat);
  CHECK(loaded.settings.enabled_axes == traj.settings.enabled_axes);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    CHECK(loaded.steps[i].axis == traj.steps[i].axis);
    CHECK(loaded.steps[i].knob == traj.steps[i].knob);
    CHECK(loaded.steps[i].cost_flops == traj.steps[i].cost_flops);
    CHECK(loaded.steps[i].factors_after == traj.steps[i].factors_after);
    CHECK(loaded.steps[i].candidates.size() ==
          traj.steps[i].candidates.size());
  }
}

TEST_CASE("trajectory CSV carries the documented columns") {
  const Trajectory traj = analytic_trajectory(100'000'000);
  const std::string csv = trajectory_to_csv(traj);
  CHECK(csv.find("step,axis,knob,gamma_tau,gamma_t,gamma_s,gamma_w,gamma_b,"
                 "gamma_d,frames,stride,resolution,flops,params,score,"
                 "candidate") != std::string::npos);
  // one start row + per step: one chosen row and one row per unchosen
  // candidate
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  std::size_t expected = 2 + traj.steps.size();  // header comment + columns
  for (const ExpansionStep& s : traj.steps) {
    expected += s.candidates.size() - 1;
  }
  expected += 1;  // start row
  CHECK(rows == expected);
}

TEST_CASE("trajectory round-trip preserves a resolution override") {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ScoreFn score = [](const ExpansionFactors& f) {
    return f.cumulative_for(Axis::kDepth);
  };
  ExpansionSettings settings;
  settings.max_steps = 1;
  const Trajectory traj =
      forward_expand(preset_factors("X3D-XL"), 80'000'000'000, score, cost,
                     settings, "rig");
  const Trajectory loaded = trajectory_from_csv(trajectory_to_csv(traj));
  CHECK(loaded.start.resolution_override == 312);
  CHECK(trajectory_to_csv(loaded) == trajectory_to_csv(traj));
}

TEST_CASE("malformed trajectories are rejected") {
  CHECK_THROWS_AS(trajectory_from_csv(""), ValidationError);
  CHECK_THROWS_AS(trajectory_from_csv("step,axis\n"), ValidationError);
  const std::string no_start =
      std::string("# x3dforge.trajectory.v1 criterion=x\n") +
      "step,axis,knob,gamma_tau,gamma_t,gamma_s,gamma_w,gamma_b,gamma_d,"
      "frames,stride,resolution,flops,params,score,candidate\n" +
      "1,depth,2,1,1,1,1,1,2,1,1,112,100,100,0.5,0\n";
  CHECK_THROWS_AS(trajectory_from_csv(no_start), ValidationError);
}

TEST_CASE("report exports agree with the report") {
  const ComplexityReport rep = report(instantiate(preset_factors("X3D-S")));
  const std::string csv = report_to_csv(rep);
  CHECK(csv.find("scope,category,flops,params\n") == 0);
  CHECK(csv.find("total,all," + std::to_string(rep.flops_madds) + ',' +
                 std::to_string(rep.params)) != std::string::npos);
  CHECK(csv.find("all,conv,") != std::string::npos);
  CHECK(csv.find("res4,all,") != std::string::npos);

  const std::string text = report_to_text(rep);
  CHECK(text.find("x3dforge.report.v1\n") == 0);
  CHECK(text.find("total.flops " + std::to_string(rep.flops_madds)) !=
        std::string::npos);

  const std::string table = render_report_table(rep);
  CHECK(table.find("total") != std::string::npos);
}

TEST_CASE("shape trace CSV lists every layer") {
  const ShapeTrace trace = propagate_shapes(instantiate(preset_factors("X2D")));
  const std::string csv = shape_trace_to_csv(trace);
  CHECK(csv.find("layer,out_t,out_h,out_w,out_c\n") == 0);
  CHECK(csv.find("data,1,112,112,3\n") != std::string::npos);
  CHECK(csv.find("res5.b2,1,4,4,192\n") != std::string::npos);
  CHECK(csv.find("fc2,1,1,1,400\n") != std::string::npos);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == trace.entries.size() + 1);
}

TEST_CASE("curve export: chosen plus candidate points, knobs preserved") {
  const Trajectory traj = analytic_trajectory(600'000'000);
  REQUIRE(traj.steps.size() == 5);
  const std::string csv = curve_csv(traj);

  std::size_t chosen = 0, candidates = 0;
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);  // header
  CHECK(line == "step,flops,score,axis,knob,candidate");
  std::getline(ss, line);  // start row
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (line.back() == '0') {
      ++chosen;
    } else {
      ++candidates;
    }
  }
  CHECK(chosen == 5);
  CHECK(candidates <= 30);
  CHECK(candidates >= 5 * 3);  // at least temporal/spatial/width-ish spread

  // Candidate rows carry the same knobs the trajectory recorded.
  for (const ExpansionStep& step : traj.steps) {
    for (const auto& [axis, eval] : step.candidates) {
      if (axis == step.axis) continue;
      char expect[128];
      std::snprintf(expect, sizeof(expect), ",%s,%.17g,1",
                    std::string(axis_name(axis)).c_str(), eval.knob);
      CHECK(csv.find(expect) != std::string::npos);
    }
  }
}

TEST_SUITE_END();
