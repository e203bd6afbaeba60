// x3dforge: instantiate X3D-family architectures, account their complexity,
// and run progressive expansion / contraction against pluggable criteria.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/criterion.hpp"
#include "x3dforge/errors.hpp"
#include "x3dforge/expansion.hpp"
#include "x3dforge/io.hpp"

namespace {

using json = nlohmann::json;
using namespace x3df;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

int default_threads() {
  if (const char* env = std::getenv("X3D_FORGE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// "tau=5,t=16,s=2" or long/greek names; unnamed factors default to 1.
ExpansionFactors parse_factor_list(const std::string& text) {
  ExpansionFactors f;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw UsageError("factor must look like name=value: '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("malformed factor value in '" + item + "'");
    }
    if (key == "tau" || key == "gamma_tau" || key == "γτ") {
      f.gamma_tau = value;
    } else if (key == "t" || key == "gamma_t" || key == "γt") {
      f.gamma_t = value;
    } else if (key == "s" || key == "gamma_s" || key == "γs") {
      f.gamma_s = value;
    } else if (key == "w" || key == "gamma_w" || key == "γw") {
      f.gamma_w = value;
    } else if (key == "b" || key == "gamma_b" || key == "γb") {
      f.gamma_b = value;
    } else if (key == "d" || key == "gamma_d" || key == "γd") {
      f.gamma_d = value;
    } else {
      throw UsageError("unknown factor name: '" + key + "'");
    }
  }
  if (auto bad = validate_factors(f); !bad.empty()) {
    throw UsageError("invalid factors: " + bad.front());
  }
  return f;
}

struct ArchFlags {
  int num_classes = 400;
  int head_width = 2048;
  bool no_se = false;
  bool no_swish = false;
  bool no_channelwise = false;
  int se_every = 2;
  double se_ratio = 1.0 / 16.0;

  ArchConfig config() const {
    ArchConfig c;
    c.num_classes = num_classes;
    c.head_width = head_width;
    c.use_se = !no_se;
    c.use_swish = !no_swish;
    c.use_channelwise = !no_channelwise;
    c.se_every = se_every;
    c.se_ratio = se_ratio;
    return c;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--classes", num_classes, "Classifier classes");
    cmd->add_option("--head-width", head_width, "fc1 width");
    cmd->add_flag("--no-se", no_se, "Disable squeeze-excitation blocks");
    cmd->add_flag("--no-swish", no_swish, "Use ReLU everywhere");
    cmd->add_flag("--no-channelwise", no_channelwise,
                  "Dense center convolutions instead of channel-wise");
    cmd->add_option("--se-every", se_every, "SE block period within a stage");
    cmd->add_option("--se-ratio", se_ratio, "SE reduction ratio");
  }
};

struct StartFlags {
  std::string preset;
  std::string factors;

  ExpansionFactors resolve() const {
    if (!preset.empty() && !factors.empty()) {
      throw UsageError("give either --preset or --factors, not both");
    }
    if (!preset.empty()) {
      if (!is_preset(preset)) throw UsageError("unknown preset: " + preset);
      return preset_factors(preset);
    }
    if (!factors.empty()) return parse_factor_list(factors);
    throw UsageError("one of --preset or --factors is required");
  }
};

void print_spec_summary(const ArchSpec& spec) {
  std::printf("input   %dx%d^2, stride %d\n", spec.input.frames,
              spec.input.resolution, spec.input.stride);
  std::printf("conv1   width %d\n", spec.conv1_width);
  for (const StageSpec& s : spec.stages) {
    std::printf("%-7s %2d blocks, width %3d, bottleneck %3d\n", s.name.c_str(),
                s.block_count, s.out_width, s.bottleneck_width);
  }
  std::printf("head    conv5 %d, fc1 %d, classes %d\n", spec.head.conv5_width,
              spec.head.fc1_width, spec.head.num_classes);
  std::printf("cost    %.4f GFLOPs, %.4f M params\n",
              count_flops(spec) / 1e9, count_params(spec) / 1e6);
}

// ---- expand / eval configuration -------------------------------------------

struct RunConfig {
  ExpansionFactors start;
  bool has_regime = false;
  Regime regime = Regime::kS;
  std::int64_t target_cost = 0;
  ExpansionSettings settings;
  CriterionSpec criterion;
  ArchConfig arch;
  std::string trajectory_path;
  std::string final_spec_path;
  std::string curve_path;
  int threads = 0;  // 0: default_threads()
};

std::vector<Axis> axes_from_json(const json& arr, const char* what) {
  std::vector<Axis> out;
  for (const auto& item : arr) {
    const auto axis = axis_from_name(item.get<std::string>());
    if (!axis) {
      throw UsageError(std::string("unknown axis in ") + what + ": " +
                       item.get<std::string>());
    }
    out.push_back(*axis);
  }
  return out;
}

CriterionSpec criterion_from_json(const json& j) {
  CriterionSpec spec;
  const std::string variant = j.value("variant", "analytic");
  if (variant == "analytic") {
    spec.variant = CriterionVariant::kAnalytic;
  } else if (variant == "replay") {
    spec.variant = CriterionVariant::kReplay;
  } else if (variant == "random_feature") {
    spec.variant = CriterionVariant::kRandomFeature;
  } else {
    throw UsageError("unknown criterion variant: " + variant);
  }
  spec.seed = j.value("seed", 1ULL);
  if (j.contains("weights")) {
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 6) throw UsageError("criterion weights need 6 entries");
    std::copy(w.begin(), w.end(), spec.analytic.weights.begin());
  }
  if (j.contains("exponents")) {
    const auto b = j.at("exponents").get<std::vector<double>>();
    if (b.size() != 6) throw UsageError("criterion exponents need 6 entries");
    std::copy(b.begin(), b.end(), spec.analytic.exponents.begin());
  }
  spec.table_path = j.value("table", "");
  if (spec.variant == CriterionVariant::kReplay) {
    if (spec.table_path.empty()) {
      throw UsageError("replay criterion needs a 'table' path");
    }
    if (!std::filesystem::exists(spec.table_path)) {
      throw UsageError("replay table does not exist: " + spec.table_path);
    }
  }
  RandomFeatureParams& rf = spec.random_feature;
  rf.lambda = j.value("lambda", rf.lambda);
  rf.activation_budget = j.value("activation_budget", rf.activation_budget);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    rf.dataset.num_classes = d.value("num_classes", rf.dataset.num_classes);
    rf.dataset.train_per_class =
        d.value("train_per_class", rf.dataset.train_per_class);
    rf.dataset.test_per_class =
        d.value("test_per_class", rf.dataset.test_per_class);
    rf.dataset.noise_level = d.value("noise_level", rf.dataset.noise_level);
    rf.dataset.drift_speed = d.value("drift_speed", rf.dataset.drift_speed);
    rf.dataset.base_frequency =
        d.value("base_frequency", rf.dataset.base_frequency);
  }
  return spec;
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig c;
  c.num_classes = j.value("num_classes", c.num_classes);
  c.head_width = j.value("head_width", c.head_width);
  c.use_channelwise = j.value("use_channelwise", c.use_channelwise);
  c.use_se = j.value("use_se", c.use_se);
  c.se_every = j.value("se_every", c.se_every);
  c.se_ratio = j.value("se_ratio", c.se_ratio);
  c.use_swish = j.value("use_swish", c.use_swish);
  return c;
}

RunConfig run_config_from_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed run config " + path + ": " + e.what());
  }
  RunConfig cfg;
  if (!j.contains("start")) throw UsageError("run config needs 'start'");
  const json& start = j.at("start");
  if (start.contains("preset")) {
    const std::string name = start.at("preset").get<std::string>();
    if (!is_preset(name)) throw UsageError("unknown preset: " + name);
    cfg.start = preset_factors(name);
  } else if (start.contains("factors")) {
    const json& f = start.at("factors");
    cfg.start.gamma_tau = f.value("gamma_tau", 1.0);
    cfg.start.gamma_t = f.value("gamma_t", 1.0);
    cfg.start.gamma_s = f.value("gamma_s", 1.0);
    cfg.start.gamma_w = f.value("gamma_w", 1.0);
    cfg.start.gamma_b = f.value("gamma_b", 1.0);
    cfg.start.gamma_d = f.value("gamma_d", 1.0);
  } else {
    throw UsageError("run config 'start' needs 'preset' or 'factors'");
  }

  const bool has_gflops = j.contains("target_gflops");
  const bool has_regime = j.contains("regime");
  if (has_gflops == has_regime) {
    throw UsageError("exactly one of 'target_gflops' or 'regime' is required");
  }
  if (has_regime) {
    const std::string name = j.at("regime").get<std::string>();
    const auto regime = regime_from_name(name);
    if (!regime) throw UsageError("unknown regime: " + name);
    cfg.has_regime = true;
    cfg.regime = *regime;
    cfg.target_cost = regime_bound(*regime);
  } else {
    const double gflops = j.at("target_gflops").get<double>();
    if (!(gflops > 0)) throw UsageError("target_gflops must be > 0");
    cfg.target_cost = static_cast<std::int64_t>(gflops * 1e9);
  }

  if (j.contains("settings")) {
    const json& s = j.at("settings");
    cfg.settings.c_hat = s.value("c_hat", cfg.settings.c_hat);
    cfg.settings.epsilon = s.value("epsilon", cfg.settings.epsilon);
    cfg.settings.max_steps = s.value("max_steps", cfg.settings.max_steps);
    if (s.contains("axes")) {
      cfg.settings.enabled_axes = axes_from_json(s.at("axes"), "axes");
    }
    if (s.contains("tie_break")) {
      cfg.settings.tie_break = axes_from_json(s.at("tie_break"), "tie_break");
    }
  }
  if (j.contains("criterion")) {
    cfg.criterion = criterion_from_json(j.at("criterion"));
  }
  if (j.contains("arch")) cfg.arch = arch_from_json(j.at("arch"));
  if (j.contains("output")) {
    const json& o = j.at("output");
    cfg.trajectory_path = o.value("trajectory", "");
    cfg.final_spec_path = o.value("spec", "");
    cfg.curve_path = o.value("curve", "");
  }
  cfg.threads = j.value("threads", 0);
  return cfg;
}

int cmd_expand_run(RunConfig cfg) {
  if (cfg.settings.max_steps == 0) {
    throw UsageError("nothing to expand: max_steps is 0");
  }
  const int threads = cfg.threads > 0 ? cfg.threads : default_threads();
  // Engine-backed criteria parallelize over clips instead of axes; that
  // bounds peak memory to a single candidate evaluation.
  int axis_threads = threads;
  if (cfg.criterion.variant == CriterionVariant::kRandomFeature) {
    cfg.criterion.random_feature.threads = threads;
    axis_threads = 1;
  }
  const auto criterion = make_criterion(cfg.criterion, cfg.arch);
  const CostFns cost = make_cost_fns(cfg.arch);
  const ScoreFn score = [&](const ExpansionFactors& f) {
    return criterion->evaluate(f);
  };

  const Trajectory traj =
      forward_expand(cfg.start, cfg.target_cost, score, cost, cfg.settings,
                     criterion->id(), StepHook{}, axis_threads);
  std::printf("start: %.4f GFLOPs, score %.6f\n", traj.start_cost / 1e9,
              traj.start_score);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const ExpansionStep& s = traj.steps[i];
    std::printf("step %zu: %-10s knob %.4f  %.4f GFLOPs  score %.6f\n", i + 1,
                std::string(axis_name(s.axis)).c_str(), s.knob,
                s.cost_flops / 1e9, s.score);
  }

  ExpansionFactors final_factors = traj.final_factors();
  if (cfg.has_regime) {
    final_factors =
        select_instance(traj, cfg.regime, cost.flops, cfg.settings.epsilon);
  }
  const ArchSpec final_spec = instantiate(final_factors, cfg.arch);
  std::printf("final: %.4f GFLOPs, %.4f M params\n",
              count_flops(final_spec) / 1e9, count_params(final_spec) / 1e6);

  if (!cfg.trajectory_path.empty()) save_trajectory(traj, cfg.trajectory_path);
  if (!cfg.curve_path.empty()) write_file(cfg.curve_path, curve_csv(traj));
  if (!cfg.final_spec_path.empty()) save_spec(final_spec, cfg.final_spec_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"X3D-family architecture expansion workbench"};
  app.require_subcommand(1);

  // --- instantiate ---
  auto* inst = app.add_subcommand("instantiate",
                                  "Resolve factors into an architecture spec");
  StartFlags inst_start;
  ArchFlags inst_arch;
  std::string inst_out;
  inst->add_option("--preset", inst_start.preset, "Preset name");
  inst->add_option("--factors", inst_start.factors,
                   "Comma list: tau=,t=,s=,w=,b=,d= (missing ones are 1)");
  inst->add_option("--out", inst_out, "Write the spec document here");
  inst_arch.attach(inst);

  // --- cost ---
  auto* cost_cmd = app.add_subcommand("cost", "Complexity report for a spec");
  StartFlags cost_start;
  ArchFlags cost_arch;
  std::string cost_spec_path, cost_csv_path, cost_text_path, cost_strategy;
  int cost_clips = 10;
  cost_cmd->add_option("--preset", cost_start.preset, "Preset name");
  cost_cmd->add_option("--factors", cost_start.factors, "Factor list");
  cost_cmd->add_option("--spec", cost_spec_path, "Spec document to load");
  cost_cmd->add_option("--strategy", cost_strategy,
                       "Inference strategy: center | lcr");
  cost_cmd->add_option("--clips", cost_clips, "Clips per video");
  cost_cmd->add_option("--csv", cost_csv_path, "Write report CSV here");
  cost_cmd->add_option("--text", cost_text_path,
                       "Write report document here");
  std::string cost_shapes_path;
  cost_cmd->add_option("--shapes", cost_shapes_path,
                       "Write the per-layer shape trace CSV here");
  cost_arch.attach(cost_cmd);

  // --- expand ---
  auto* expand = app.add_subcommand(
      "expand", "Forward expansion (plus contraction for a regime target)");
  StartFlags exp_start;
  ArchFlags exp_arch;
  std::string exp_config, exp_regime, exp_criterion = "analytic";
  std::string exp_table, exp_trajectory, exp_final_spec, exp_curve;
  double exp_gflops = 0.0, exp_chat = 2.0, exp_epsilon = 0.05,
         exp_lambda = 1e-2;
  std::uint64_t exp_seed = 1;
  int exp_max_steps = 16, exp_threads = 0;
  std::string exp_axes, exp_tiebreak;
  expand->add_option("--config", exp_config, "JSON run configuration");
  expand->add_option("--start-preset", exp_start.preset, "Start preset");
  expand->add_option("--start-factors", exp_start.factors, "Start factors");
  expand->add_option("--target-gflops", exp_gflops, "Target cost in GFLOPs");
  expand->add_option("--regime", exp_regime,
                     "Target regime: XS S M L XL XXL");
  expand->add_option("--criterion", exp_criterion,
                     "analytic | replay | random_feature");
  expand->add_option("--table", exp_table, "Replay table CSV");
  expand->add_option("--seed", exp_seed, "Criterion seed");
  expand->add_option("--lambda", exp_lambda, "Ridge regularizer");
  expand->add_option("--c-hat", exp_chat, "Per-step cost multiplier");
  expand->add_option("--epsilon", exp_epsilon, "Cost matching tolerance");
  expand->add_option("--max-steps", exp_max_steps, "Step limit");
  expand->add_option("--axes", exp_axes, "Enabled axes, comma separated");
  expand->add_option("--tie-break", exp_tiebreak,
                     "Tie-break order, comma separated");
  expand->add_option("--trajectory", exp_trajectory, "Trajectory CSV path");
  expand->add_option("--final-spec", exp_final_spec, "Final spec path");
  expand->add_option("--curve", exp_curve, "Curve CSV path");
  expand->add_option("--threads", exp_threads, "Worker threads");
  exp_arch.attach(expand);

  // --- contract ---
  auto* contract = app.add_subcommand(
      "contract", "Reduce the last step of a trajectory to a target cost");
  ArchFlags con_arch;
  std::string con_trajectory, con_out;
  double con_gflops = 0.0;
  contract->add_option("--trajectory", con_trajectory, "Trajectory CSV")
      ->required();
  contract->add_option("--target-gflops", con_gflops, "Target cost")
      ->required();
  contract->add_option("--out", con_out, "Write the contracted spec here");
  con_arch.attach(contract);

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "Evaluate a criterion on factors");
  StartFlags eval_start;
  ArchFlags eval_arch;
  std::string eval_criterion = "analytic", eval_table;
  std::uint64_t eval_seed = 1;
  double eval_lambda = 1e-2;
  eval->add_option("--preset", eval_start.preset, "Preset name");
  eval->add_option("--factors", eval_start.factors, "Factor list");
  eval->add_option("--criterion", eval_criterion,
                   "analytic | replay | random_feature");
  eval->add_option("--table", eval_table, "Replay table CSV");
  eval->add_option("--seed", eval_seed, "Criterion seed");
  eval->add_option("--lambda", eval_lambda, "Ridge regularizer");
  eval_arch.attach(eval);

  // --- curve ---
  auto* curve = app.add_subcommand("curve",
                                   "Trade-off curve data from a trajectory");
  std::string curve_trajectory, curve_out;
  curve->add_option("--trajectory", curve_trajectory, "Trajectory CSV")
      ->required();
  curve->add_option("--out", curve_out, "Write curve CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (inst->parsed()) {
      const ArchSpec spec =
          instantiate(inst_start.resolve(), inst_arch.config());
      print_spec_summary(spec);
      if (!inst_out.empty()) save_spec(spec, inst_out);
      return kExitOk;
    }

    if (cost_cmd->parsed()) {
      ArchSpec spec;
      if (!cost_spec_path.empty()) {
        spec = load_spec(cost_spec_path);
        if (auto bad = validate(spec); !bad.empty()) {
          throw ValidationError("loaded spec is invalid: " + bad.front());
        }
      } else {
        spec = instantiate(cost_start.resolve(), cost_arch.config());
      }
      const ComplexityReport rep = report(spec);
      std::fputs(render_report_table(rep).c_str(), stdout);
      if (!cost_strategy.empty()) {
        InferenceStrategy strategy;
        if (cost_strategy == "center") {
          strategy = InferenceStrategy::kCenter;
        } else if (cost_strategy == "lcr") {
          strategy = InferenceStrategy::kLeftCenterRight;
        } else {
          throw UsageError("unknown strategy: " + cost_strategy);
        }
        const InferenceCost ic = inference_cost(spec, strategy, cost_clips);
        std::printf(
            "inference: %.4f GFLOPs x %d views (crop %d) = %.4f GFLOPs\n",
            ic.per_view_flops / 1e9, ic.views, ic.crop, ic.total / 1e9);
      }
      if (!cost_csv_path.empty()) write_file(cost_csv_path, report_to_csv(rep));
      if (!cost_text_path.empty()) {
        write_file(cost_text_path, report_to_text(rep));
      }
      if (!cost_shapes_path.empty()) {
        write_file(cost_shapes_path, shape_trace_to_csv(propagate_shapes(spec)));
      }
      return kExitOk;
    }

    if (expand->parsed()) {
      RunConfig cfg;
      if (!exp_config.empty()) {
        cfg = run_config_from_json(exp_config);
      } else {
        cfg.start = exp_start.resolve();
        const bool has_gflops = exp_gflops > 0.0;
        const bool has_regime = !exp_regime.empty();
        if (has_gflops == has_regime) {
          throw UsageError(
              "exactly one of --target-gflops or --regime is required");
        }
        if (has_regime) {
          const auto regime = regime_from_name(exp_regime);
          if (!regime) throw UsageError("unknown regime: " + exp_regime);
          cfg.has_regime = true;
          cfg.regime = *regime;
          cfg.target_cost = regime_bound(*regime);
        } else {
          cfg.target_cost = static_cast<std::int64_t>(exp_gflops * 1e9);
        }
        cfg.settings.c_hat = exp_chat;
        cfg.settings.epsilon = exp_epsilon;
        cfg.settings.max_steps = exp_max_steps;
        if (!exp_axes.empty()) {
          cfg.settings.enabled_axes.clear();
          for (const std::string& name : [&] {
                 std::vector<std::string> parts;
                 std::stringstream names(exp_axes);
                 std::string part;
                 while (std::getline(names, part, ',')) parts.push_back(part);
                 return parts;
               }()) {
            const auto axis = axis_from_name(name);
            if (!axis) throw UsageError("unknown axis: " + name);
            cfg.settings.enabled_axes.push_back(*axis);
          }
        }
        if (exp_criterion == "analytic") {
          cfg.criterion.variant = CriterionVariant::kAnalytic;
        } else if (exp_criterion == "replay") {
          cfg.criterion.variant = CriterionVariant::kReplay;
          if (exp_table.empty()) throw UsageError("replay needs --table");
          if (!std::filesystem::exists(exp_table)) {
            throw UsageError("replay table does not exist: " + exp_table);
          }
          cfg.criterion.table_path = exp_table;
        } else if (exp_criterion == "random_feature") {
          cfg.criterion.variant = CriterionVariant::kRandomFeature;
          cfg.criterion.random_feature.lambda = exp_lambda;
        } else {
          throw UsageError("unknown criterion: " + exp_criterion);
        }
        cfg.criterion.seed = exp_seed;
        cfg.arch = exp_arch.config();
        cfg.trajectory_path = exp_trajectory;
        cfg.final_spec_path = exp_final_spec;
        cfg.curve_path = exp_curve;
        cfg.threads = exp_threads;
      }
      return cmd_expand_run(std::move(cfg));
    }

    if (contract->parsed()) {
      const Trajectory traj = load_trajectory(con_trajectory);
      if (traj.steps.empty()) {
        throw ValidationError("trajectory has no steps to contract");
      }
      const ArchConfig arch = con_arch.config();
      const CostFns cost = make_cost_fns(arch);
      const std::int64_t target =
          static_cast<std::int64_t>(con_gflops * 1e9);
      const ExpansionFactors contracted =
          backward_contract(traj, target, cost.flops, traj.settings.epsilon);
      const ArchSpec spec = instantiate(contracted, arch);
      print_spec_summary(spec);
      if (!con_out.empty()) save_spec(spec, con_out);
      return kExitOk;
    }

    if (eval->parsed()) {
      CriterionSpec cspec;
      if (eval_criterion == "analytic") {
        cspec.variant = CriterionVariant::kAnalytic;
      } else if (eval_criterion == "replay") {
        cspec.variant = CriterionVariant::kReplay;
        if (eval_table.empty()) throw UsageError("replay needs --table");
        if (!std::filesystem::exists(eval_table)) {
          throw UsageError("replay table does not exist: " + eval_table);
        }
        cspec.table_path = eval_table;
      } else if (eval_criterion == "random_feature") {
        cspec.variant = CriterionVariant::kRandomFeature;
        cspec.random_feature.lambda = eval_lambda;
        cspec.random_feature.threads = default_threads();
      } else {
        throw UsageError("unknown criterion: " + eval_criterion);
      }
      cspec.seed = eval_seed;
      const auto criterion = make_criterion(cspec, eval_arch.config());
      std::printf("%.10g\n", criterion->evaluate(eval_start.resolve()));
      return kExitOk;
    }

    if (curve->parsed()) {
      const Trajectory traj = load_trajectory(curve_trajectory);
      const std::string csv = curve_csv(traj);
      if (curve_out.empty()) {
        std::fputs(csv.c_str(), stdout);
      } else {
        write_file(curve_out, csv);
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const CriterionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  }
  return kExitUsage;
}
