#include "x3dforge/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "x3dforge/errors.hpp"

namespace x3df {

namespace {

constexpr const char* kSpecMagic = "x3dforge.spec.v1";
constexpr const char* kReportMagic = "x3dforge.report.v1";
constexpr const char* kTrajectoryMagic = "x3dforge.trajectory.v1";
constexpr const char* kTrajectoryHeader =
    "step,axis,knob,gamma_tau,gamma_t,gamma_s,gamma_w,gamma_b,gamma_d,"
    "frames,stride,resolution,flops,params,score,candidate";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("malformed number: '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("malformed integer: '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Ordered key -> value document reader.
class KeyValueDoc {
 public:
  KeyValueDoc(const std::string& text, const char* magic) {
    std::stringstream ss(text);
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
      line = strip_cr(line);
      if (line.empty()) continue;
      if (first) {
        if (line != magic) {
          throw ValidationError(std::string("expected header '") + magic +
                                "', got '" + line + "'");
        }
        first = false;
        continue;
      }
      const std::size_t space = line.find(' ');
      if (space == std::string::npos) {
        throw ValidationError("malformed line: '" + line + "'");
      }
      entries_[line.substr(0, space)] = line.substr(space + 1);
    }
    if (first) throw ValidationError("empty document");
  }

  const std::string& raw(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw ValidationError("missing field: " + key);
    }
    return it->second;
  }
  std::int64_t integer(const std::string& key) const {
    return parse_int(raw(key));
  }
  double real(const std::string& key) const { return parse_double(raw(key)); }

 private:
  std::map<std::string, std::string> entries_;
};

void emit(std::string& out, const std::string& key, const std::string& value) {
  out += key;
  out += ' ';
  out += value;
  out += '\n';
}

void emit(std::string& out, const std::string& key, std::int64_t value) {
  emit(out, key, std::to_string(value));
}

void emit(std::string& out, const std::string& key, double value) {
  emit(out, key, fmt_double(value));
}

std::string factors_csv_fields(const ExpansionFactors& f) {
  const InputGeometry g = resolve_input_geometry(f);
  std::string out;
  for (double v : {f.gamma_tau, f.gamma_t, f.gamma_s, f.gamma_w, f.gamma_b,
                   f.gamma_d}) {
    out += fmt_double(v);
    out += ',';
  }
  out += std::to_string(g.frames) + ',' + std::to_string(g.stride) + ',' +
         std::to_string(g.resolution);
  return out;
}

std::string join_axes(const std::vector<Axis>& axes) {
  std::string out;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (i) out += '|';
    out += axis_name(axes[i]);
  }
  return out;
}

std::vector<Axis> parse_axes(const std::string& s) {
  std::vector<Axis> out;
  for (const std::string& name : split(s, '|')) {
    const auto axis = axis_from_name(name);
    if (!axis) throw ValidationError("unknown axis name: '" + name + "'");
    out.push_back(*axis);
  }
  return out;
}

}  // namespace

std::string spec_to_text(const ArchSpec& spec) {
  std::string out;
  out += kSpecMagic;
  out += '\n';
  emit(out, "input.frames", static_cast<std::int64_t>(spec.input.frames));
  emit(out, "input.stride", static_cast<std::int64_t>(spec.input.stride));
  emit(out, "input.resolution",
       static_cast<std::int64_t>(spec.input.resolution));
  emit(out, "conv1.width", static_cast<std::int64_t>(spec.conv1_width));
  emit(out, "stages.count", static_cast<std::int64_t>(spec.stages.size()));
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& s = spec.stages[i];
    const std::string p = "stages[" + std::to_string(i) + "].";
    emit(out, p + "name", s.name);
    emit(out, p + "blocks", static_cast<std::int64_t>(s.block_count));
    emit(out, p + "out_width", static_cast<std::int64_t>(s.out_width));
    emit(out, p + "bottleneck_width",
         static_cast<std::int64_t>(s.bottleneck_width));
    emit(out, p + "spatial_stride",
         static_cast<std::int64_t>(s.spatial_stride));
    emit(out, p + "temporal_stride",
         static_cast<std::int64_t>(s.temporal_stride));
  }
  emit(out, "head.conv5_width",
       static_cast<std::int64_t>(spec.head.conv5_width));
  emit(out, "head.fc1_width", static_cast<std::int64_t>(spec.head.fc1_width));
  emit(out, "head.classes", static_cast<std::int64_t>(spec.head.num_classes));
  emit(out, "flags.use_channelwise",
       static_cast<std::int64_t>(spec.config.use_channelwise ? 1 : 0));
  emit(out, "flags.use_se",
       static_cast<std::int64_t>(spec.config.use_se ? 1 : 0));
  emit(out, "flags.se_every", static_cast<std::int64_t>(spec.config.se_every));
  emit(out, "flags.se_ratio", spec.config.se_ratio);
  emit(out, "flags.use_swish",
       static_cast<std::int64_t>(spec.config.use_swish ? 1 : 0));
  emit(out, "flags.head_width",
       static_cast<std::int64_t>(spec.config.head_width));
  emit(out, "flags.count_convention", std::string("conv_fc"));
  emit(out, "factors.gamma_tau", spec.factors.gamma_tau);
  emit(out, "factors.gamma_t", spec.factors.gamma_t);
  emit(out, "factors.gamma_s", spec.factors.gamma_s);
  emit(out, "factors.gamma_w", spec.factors.gamma_w);
  emit(out, "factors.gamma_b", spec.factors.gamma_b);
  emit(out, "factors.gamma_d", spec.factors.gamma_d);
  emit(out, "factors.resolution_override",
       static_cast<std::int64_t>(spec.factors.resolution_override));
  for (Axis axis : kAllAxes) {
    emit(out, "factors.cumulative." + std::string(axis_name(axis)),
         spec.factors.cumulative_for(axis));
  }
  return out;
}

ArchSpec spec_from_text(const std::string& text) {
  const KeyValueDoc doc(text, kSpecMagic);
  ArchSpec spec;
  spec.input.frames = static_cast<int>(doc.integer("input.frames"));
  spec.input.stride = static_cast<int>(doc.integer("input.stride"));
  spec.input.resolution = static_cast<int>(doc.integer("input.resolution"));
  spec.conv1_width = static_cast<int>(doc.integer("conv1.width"));
  const int stage_count = static_cast<int>(doc.integer("stages.count"));
  for (int i = 0; i < stage_count; ++i) {
    const std::string p = "stages[" + std::to_string(i) + "].";
    StageSpec s;
    s.name = doc.raw(p + "name");
    s.block_count = static_cast<int>(doc.integer(p + "blocks"));
    s.out_width = static_cast<int>(doc.integer(p + "out_width"));
    s.bottleneck_width =
        static_cast<int>(doc.integer(p + "bottleneck_width"));
    s.spatial_stride = static_cast<int>(doc.integer(p + "spatial_stride"));
    s.temporal_stride = static_cast<int>(doc.integer(p + "temporal_stride"));
    spec.stages.push_back(s);
  }
  spec.head.conv5_width = static_cast<int>(doc.integer("head.conv5_width"));
  spec.head.fc1_width = static_cast<int>(doc.integer("head.fc1_width"));
  spec.head.num_classes = static_cast<int>(doc.integer("head.classes"));
  spec.config.use_channelwise = doc.integer("flags.use_channelwise") != 0;
  spec.config.use_se = doc.integer("flags.use_se") != 0;
  spec.config.se_every = static_cast<int>(doc.integer("flags.se_every"));
  spec.config.se_ratio = doc.real("flags.se_ratio");
  spec.config.use_swish = doc.integer("flags.use_swish") != 0;
  spec.config.head_width = static_cast<int>(doc.integer("flags.head_width"));
  spec.config.num_classes = spec.head.num_classes;
  spec.factors.gamma_tau = doc.real("factors.gamma_tau");
  spec.factors.gamma_t = doc.real("factors.gamma_t");
  spec.factors.gamma_s = doc.real("factors.gamma_s");
  spec.factors.gamma_w = doc.real("factors.gamma_w");
  spec.factors.gamma_b = doc.real("factors.gamma_b");
  spec.factors.gamma_d = doc.real("factors.gamma_d");
  spec.factors.resolution_override =
      static_cast<int>(doc.integer("factors.resolution_override"));
  for (Axis axis : kAllAxes) {
    spec.factors.cumulative[static_cast<int>(axis)] =
        doc.real("factors.cumulative." + std::string(axis_name(axis)));
  }
  return spec;
}

void save_spec(const ArchSpec& spec, const std::string& path) {
  write_file(path, spec_to_text(spec));
}

ArchSpec load_spec(const std::string& path) {
  return spec_from_text(read_file(path));
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "# ";
  out += kTrajectoryMagic;
  out += " c_hat=" + fmt_double(traj.settings.c_hat);
  out += " epsilon=" + fmt_double(traj.settings.epsilon);
  out += " max_steps=" + std::to_string(traj.settings.max_steps);
  out += " axes=" + join_axes(traj.settings.enabled_axes);
  out += " tie_break=" + join_axes(traj.settings.tie_break);
  out += " criterion=" + traj.criterion_id;
  out += '\n';
  out += kTrajectoryHeader;
  out += '\n';

  auto row = [&out](int step, const std::string& axis, double knob,
                    const ExpansionFactors& f, std::int64_t flops,
                    std::int64_t params, double score, int candidate) {
    out += std::to_string(step) + ',' + axis + ',' + fmt_double(knob) + ',' +
           factors_csv_fields(f) + ',' + std::to_string(flops) + ',' +
           std::to_string(params) + ',' + fmt_double(score) + ',' +
           std::to_string(candidate) + '\n';
  };

  row(0, "start", 1.0, traj.start, traj.start_cost, traj.start_params,
      traj.start_score, 0);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const ExpansionStep& step = traj.steps[i];
    const int n = static_cast<int>(i) + 1;
    row(n, std::string(axis_name(step.axis)), step.knob, step.factors_after,
        step.cost_flops, step.params, step.score, 0);
    for (const auto& [axis, eval] : step.candidates) {
      if (axis == step.axis) continue;
      row(n, std::string(axis_name(axis)), eval.knob, eval.factors, eval.cost,
          eval.params, eval.score, 1);
    }
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) {
    throw ValidationError("empty trajectory file");
  }
  line = strip_cr(line);
  const std::string prefix = std::string("# ") + kTrajectoryMagic;
  if (!line.starts_with(prefix)) {
    throw ValidationError("trajectory file lacks the " +
                          std::string(kTrajectoryMagic) + " header");
  }

  Trajectory traj;
  // Header fields: space separated key=value, criterion last (its value
  // may itself contain spaces).
  const std::size_t crit_pos = line.find(" criterion=");
  if (crit_pos != std::string::npos) {
    traj.criterion_id = line.substr(crit_pos + 11);
  }
  const std::string head = line.substr(
      prefix.size(),
      (crit_pos == std::string::npos ? line.size() : crit_pos) - prefix.size());
  for (const std::string& token : split(head, ' ')) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "c_hat") traj.settings.c_hat = parse_double(value);
    if (key == "epsilon") traj.settings.epsilon = parse_double(value);
    if (key == "max_steps") {
      traj.settings.max_steps = static_cast<int>(parse_int(value));
    }
    if (key == "axes") traj.settings.enabled_axes = parse_axes(value);
    if (key == "tie_break") traj.settings.tie_break = parse_axes(value);
  }

  if (!std::getline(ss, line) || strip_cr(line) != kTrajectoryHeader) {
    throw ValidationError("trajectory file lacks the column header");
  }

  bool start_seen = false;
  ExpansionFactors prev = {};
  while (std::getline(ss, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 16) {
      throw ValidationError("trajectory row must have 16 fields: " + line);
    }
    const int step = static_cast<int>(parse_int(f[0]));
    const std::string axis_field = f[1];
    const double knob = parse_double(f[2]);
    ExpansionFactors factors;
    factors.gamma_tau = parse_double(f[3]);
    factors.gamma_t = parse_double(f[4]);
    factors.gamma_s = parse_double(f[5]);
    factors.gamma_w = parse_double(f[6]);
    factors.gamma_b = parse_double(f[7]);
    factors.gamma_d = parse_double(f[8]);
    const int resolution = static_cast<int>(parse_int(f[11]));
    // The stored resolution is authoritative; a mismatch with the derived
    // value can only come from an explicit override.
    if (resolve_input_geometry(factors).resolution != resolution) {
      factors.resolution_override = resolution;
    }
    const std::int64_t flops = parse_int(f[12]);
    const std::int64_t params = parse_int(f[13]);
    const double score = parse_double(f[14]);
    const int candidate = static_cast<int>(parse_int(f[15]));

    if (step == 0) {
      if (axis_field != "start" || candidate != 0) {
        throw ValidationError("step 0 must be the start row");
      }
      traj.start = factors;
      traj.start_cost = flops;
      traj.start_params = params;
      traj.start_score = score;
      prev = factors;
      start_seen = true;
      continue;
    }
    if (!start_seen) {
      throw ValidationError("trajectory rows precede the start row");
    }
    const auto axis = axis_from_name(axis_field);
    if (!axis) throw ValidationError("unknown axis: '" + axis_field + "'");
    // Cumulative magnitudes are not persisted; rebuild them by replaying
    // the knobs from the start point.
    if (candidate == 0) {
      if (static_cast<int>(traj.steps.size()) + 1 != step) {
        throw ValidationError("trajectory steps out of order at step " +
                              std::to_string(step));
      }
      factors.cumulative = prev.cumulative;
      factors.cumulative[static_cast<int>(*axis)] *= knob;
      ExpansionStep st;
      st.axis = *axis;
      st.knob = knob;
      st.factors_after = factors;
      st.cost_flops = flops;
      st.params = params;
      st.score = score;
      st.candidates[*axis] = {knob, flops, params, score, factors};
      traj.steps.push_back(st);
      prev = factors;
    } else {
      if (traj.steps.empty() ||
          static_cast<int>(traj.steps.size()) != step) {
        throw ValidationError("candidate row without its step: " + line);
      }
      ExpansionStep& st = traj.steps.back();
      const ExpansionFactors& before =
          traj.steps.size() >= 2 ? traj.steps[traj.steps.size() - 2].factors_after
                                 : traj.start;
      factors.cumulative = before.cumulative;
      factors.cumulative[static_cast<int>(*axis)] *= knob;
      st.candidates[*axis] = {knob, flops, params, score, factors};
    }
  }
  if (!start_seen) throw ValidationError("trajectory has no start row");
  return traj;
}

void save_trajectory(const Trajectory& trajectory, const std::string& path) {
  write_file(path, trajectory_to_csv(trajectory));
}

Trajectory load_trajectory(const std::string& path) {
  return trajectory_from_csv(read_file(path));
}

namespace {

std::vector<std::string> stage_order(const ComplexityReport& rep) {
  std::vector<std::string> order = {"conv1", "res2", "res3",
                                    "res4",  "res5", "head"};
  for (const auto& [name, cost] : rep.per_stage) {
    if (std::find(order.begin(), order.end(), name) == order.end()) {
      order.push_back(name);
    }
  }
  std::vector<std::string> present;
  for (const std::string& name : order) {
    if (rep.per_stage.count(name)) present.push_back(name);
  }
  return present;
}

constexpr std::array<const char*, 4> kCategoryOrder = {"conv", "fc", "se",
                                                       "norm"};

}  // namespace

std::string report_to_csv(const ComplexityReport& rep) {
  std::string out = "scope,category,flops,params\n";
  out += "total,all," + std::to_string(rep.flops_madds) + ',' +
         std::to_string(rep.params) + '\n';
  for (const std::string& name : stage_order(rep)) {
    const CostPair& c = rep.per_stage.at(name);
    out += name + ",all," + std::to_string(c.flops) + ',' +
           std::to_string(c.params) + '\n';
  }
  for (const char* cat : kCategoryOrder) {
    const auto it = rep.per_category.find(cat);
    if (it == rep.per_category.end()) continue;
    out += "all," + std::string(cat) + ',' + std::to_string(it->second.flops) +
           ',' + std::to_string(it->second.params) + '\n';
  }
  return out;
}

std::string report_to_text(const ComplexityReport& rep) {
  std::string out;
  out += kReportMagic;
  out += '\n';
  emit(out, "total.flops", rep.flops_madds);
  emit(out, "total.params", rep.params);
  for (const std::string& name : stage_order(rep)) {
    const CostPair& c = rep.per_stage.at(name);
    emit(out, "stage." + name + ".flops", c.flops);
    emit(out, "stage." + name + ".params", c.params);
  }
  for (const char* cat : kCategoryOrder) {
    const auto it = rep.per_category.find(cat);
    if (it == rep.per_category.end()) continue;
    emit(out, "category." + std::string(cat) + ".flops", it->second.flops);
    emit(out, "category." + std::string(cat) + ".params", it->second.params);
  }
  return out;
}

std::string render_report_table(const ComplexityReport& rep) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %-8s %16s %14s %10s %10s\n", "scope",
                "category", "madds", "params", "gflops", "mparams");
  out += buf;
  auto line = [&](const std::string& scope, const std::string& cat,
                  const CostPair& c) {
    std::snprintf(buf, sizeof(buf),
                  "%-8s %-8s %16" PRId64 " %14" PRId64 " %10.4f %10.4f\n",
                  scope.c_str(), cat.c_str(), c.flops, c.params,
                  c.flops / 1e9, c.params / 1e6);
    out += buf;
  };
  for (const std::string& name : stage_order(rep)) {
    line(name, "all", rep.per_stage.at(name));
  }
  for (const char* cat : kCategoryOrder) {
    const auto it = rep.per_category.find(cat);
    if (it != rep.per_category.end()) line("all", cat, it->second);
  }
  line("total", "all", {rep.flops_madds, rep.params});
  return out;
}

std::string curve_csv(const Trajectory& traj) {
  std::string out = "step,flops,score,axis,knob,candidate\n";
  out += "0," + std::to_string(traj.start_cost) + ',' +
         fmt_double(traj.start_score) + ",start,1,0\n";
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const ExpansionStep& step = traj.steps[i];
    const std::string n = std::to_string(i + 1);
    out += n + ',' + std::to_string(step.cost_flops) + ',' +
           fmt_double(step.score) + ',' + std::string(axis_name(step.axis)) +
           ',' + fmt_double(step.knob) + ",0\n";
    for (const auto& [axis, eval] : step.candidates) {
      if (axis == step.axis) continue;
      out += n + ',' + std::to_string(eval.cost) + ',' +
             fmt_double(eval.score) + ',' + std::string(axis_name(axis)) +
             ',' + fmt_double(eval.knob) + ",1\n";
    }
  }
  return out;
}

std::string shape_trace_to_csv(const ShapeTrace& trace) {
  std::string out = "layer,out_t,out_h,out_w,out_c\n";
  for (const ShapeEntry& e : trace.entries) {
    out += e.layer_id + ',' + std::to_string(e.out_t) + ',' +
           std::to_string(e.out_h) + ',' + std::to_string(e.out_w) + ',' +
           std::to_string(e.out_c) + '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
  if (!out) throw ValidationError("failed writing file: " + path);
}

}  // namespace x3df
