#include "x3dforge/arch.hpp"

#include <cmath>
#include <cstdlib>

#include "x3dforge/errors.hpp"

namespace x3df {

namespace {

// X2D trunk: stage widths before the global width multiplier is applied.
// The effective conv width multiplier is 2 * gamma_w, so unit factors
// produce the 24/48/96/192 ladder.
constexpr std::array<int, 4> kBaseStageWidths = {12, 24, 48, 96};
constexpr std::array<int, 4> kBaseStageDepths = {1, 2, 5, 3};
constexpr std::array<const char*, 4> kStageNames = {"res2", "res3", "res4",
                                                    "res5"};
constexpr int kBaseResolution = 112;
constexpr int kMinRes5Pixels = 4;

int nearest_int(double x) { return static_cast<int>(std::llround(x)); }

int nearest_multiple_of_8(double x) {
  return 8 * static_cast<int>(std::llround(x / 8.0));
}

int halved(int size) { return (size + 1) / 2; }  // ceil(size / 2)

}  // namespace

std::string_view axis_name(Axis axis) {
  switch (axis) {
    case Axis::kFast: return "fast";
    case Axis::kTemporal: return "temporal";
    case Axis::kSpatial: return "spatial";
    case Axis::kWidth: return "width";
    case Axis::kBottleneck: return "bottleneck";
    case Axis::kDepth: return "depth";
  }
  return "?";
}

std::optional<Axis> axis_from_name(std::string_view name) {
  for (Axis axis : kAllAxes) {
    if (axis_name(axis) == name) return axis;
  }
  return std::nullopt;
}

std::vector<std::string> validate_factors(const ExpansionFactors& f) {
  std::vector<std::string> out;
  auto positive = [&out](double v, const char* name) {
    if (!(v > 0.0)) out.push_back(std::string(name) + " must be > 0");
  };
  positive(f.gamma_tau, "gamma_tau");
  positive(f.gamma_t, "gamma_t");
  positive(f.gamma_s, "gamma_s");
  positive(f.gamma_w, "gamma_w");
  positive(f.gamma_b, "gamma_b");
  positive(f.gamma_d, "gamma_d");
  for (Axis axis : kAllAxes) {
    if (f.cumulative_for(axis) < 1.0) {
      out.push_back("cumulative magnitude for axis " +
                    std::string(axis_name(axis)) + " must be >= 1");
    }
  }
  if (f.resolution_override < 0) {
    out.push_back("resolution_override must be >= 0");
  }
  return out;
}

std::vector<std::string> validate_config(const ArchConfig& c) {
  std::vector<std::string> out;
  if (c.num_classes < 1) out.push_back("num_classes must be >= 1");
  if (c.head_width < 1) out.push_back("head_width must be >= 1");
  if (c.se_every < 1) out.push_back("se_every must be >= 1");
  if (!(c.se_ratio > 0.0 && c.se_ratio <= 1.0)) {
    out.push_back("se_ratio must be in (0, 1]");
  }
  return out;
}

int round_width(int base_width, double multiplier, int divisor) {
  const double width = base_width * multiplier;
  int rounded = static_cast<int>(width + divisor / 2.0) / divisor * divisor;
  rounded = std::max(divisor, rounded);
  if (rounded < 0.9 * width) rounded += divisor;
  return rounded;
}

int round_depth(int base_repeats, double gamma_d) {
  // 1e-9 relative guard: products of rational factors that land exactly on
  // an integer must not spill to the next block.
  const double scaled = base_repeats * gamma_d;
  return static_cast<int>(std::ceil(scaled * (1.0 - 1e-9)));
}

InputGeometry resolve_input_geometry(const ExpansionFactors& factors) {
  InputGeometry g;
  g.frames = std::max(1, nearest_int(factors.gamma_t));
  g.stride = std::max(1, nearest_int(factors.gamma_tau));
  g.resolution = factors.resolution_override > 0
                     ? factors.resolution_override
                     : nearest_multiple_of_8(kBaseResolution * factors.gamma_s);
  return g;
}

ArchSpec instantiate(const ExpansionFactors& factors,
                     const ArchConfig& config) {
  if (auto bad = validate_factors(factors); !bad.empty()) {
    throw ValidationError("invalid factors: " + bad.front());
  }
  if (auto bad = validate_config(config); !bad.empty()) {
    throw ValidationError("invalid config: " + bad.front());
  }

  ArchSpec spec;
  spec.factors = factors;
  spec.config = config;
  spec.input = resolve_input_geometry(factors);

  const double width_multiplier = 2.0 * factors.gamma_w;
  for (std::size_t i = 0; i < kBaseStageWidths.size(); ++i) {
    StageSpec stage;
    stage.name = kStageNames[i];
    stage.block_count = round_depth(kBaseStageDepths[i], factors.gamma_d);
    stage.out_width = round_width(kBaseStageWidths[i], width_multiplier);
    stage.bottleneck_width = nearest_int(stage.out_width * factors.gamma_b);
    stage.spatial_stride = 2;
    stage.temporal_stride = 1;
    spec.stages.push_back(stage);
  }
  spec.conv1_width = spec.stages.front().out_width;
  spec.head.conv5_width = nearest_int(spec.stages.back().out_width *
                                      factors.gamma_b);
  spec.head.fc1_width = config.head_width;
  spec.head.num_classes = config.num_classes;

  // Geometry guard: five spatial halvings (conv1 + one per stage) must
  // leave at least kMinRes5Pixels, and the clip at least one frame.
  int size = spec.input.resolution;
  for (int h = 0; h < 5; ++h) size = halved(size);
  if (size < kMinRes5Pixels) {
    throw ValidationError(
        "input resolution " + std::to_string(spec.input.resolution) +
        " collapses below " + std::to_string(kMinRes5Pixels) + " px at res5");
  }
  if (spec.input.frames < 1) {
    throw ValidationError("input frames must be >= 1");
  }
  return spec;
}

std::vector<BlockSpec> ArchSpec::blocks(std::size_t stage_index) const {
  const StageSpec& stage = stages.at(stage_index);
  std::vector<BlockSpec> out;
  out.reserve(stage.block_count);
  int in_width = stage_in_width(stage_index);
  for (int b = 0; b < stage.block_count; ++b) {
    BlockSpec block;
    block.in_width = in_width;
    block.bottleneck_width = stage.bottleneck_width;
    block.out_width = stage.out_width;
    block.spatial_stride = (b == 0) ? stage.spatial_stride : 1;
    block.has_se = config.use_se && (b % config.se_every == 0);
    block.has_projection_shortcut =
        block.in_width != block.out_width || block.spatial_stride != 1;
    out.push_back(block);
    in_width = stage.out_width;
  }
  return out;
}

int ArchSpec::stage_in_width(std::size_t stage_index) const {
  return stage_index == 0 ? conv1_width : stages.at(stage_index - 1).out_width;
}

std::vector<std::string> validate(const ArchSpec& spec) {
  std::vector<std::string> out;
  if (spec.input.frames < 1) out.push_back("input.frames must be >= 1");
  if (spec.input.stride < 1) out.push_back("input.stride must be >= 1");
  if (spec.input.resolution < 1) out.push_back("input.resolution must be >= 1");
  if (spec.conv1_width < 1) out.push_back("conv1.width must be >= 1");
  if (spec.stages.size() != 4) {
    out.push_back("expected 4 residual stages (res2..res5)");
  }
  int prev_width = spec.conv1_width;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& s = spec.stages[i];
    const std::string where = s.name.empty() ? "stage " + std::to_string(i)
                                             : s.name;
    if (s.block_count < 1) out.push_back(where + ": block_count must be >= 1");
    if (s.out_width < 1) out.push_back(where + ": out_width must be >= 1");
    if (s.bottleneck_width < 1) {
      out.push_back(where + ": bottleneck_width must be >= 1");
    }
    if (s.spatial_stride != 2) {
      out.push_back(where + ": first block must carry spatial stride 2");
    }
    if (s.temporal_stride != 1) {
      out.push_back(where + ": temporal striding is not allowed");
    }
    if (i > 0 && s.out_width <= spec.stages[i - 1].out_width) {
      out.push_back(where + ": stage widths must be strictly increasing");
    }
    prev_width = s.out_width;
  }
  (void)prev_width;
  if (spec.head.conv5_width < 1) out.push_back("head.conv5_width must be >= 1");
  if (spec.head.fc1_width < 1) out.push_back("head.fc1_width must be >= 1");
  if (spec.head.num_classes < 1) out.push_back("head.classes must be >= 1");
  for (const std::string& msg : validate_config(spec.config)) out.push_back(msg);
  return out;
}

std::vector<std::string> preset_names() {
  return {"X2D", "X3D-XS", "X3D-S", "X3D-M", "X3D-XL"};
}

bool is_preset(std::string_view name) {
  for (const std::string& p : preset_names()) {
    if (p == name) return true;
  }
  return false;
}

ExpansionFactors preset_factors(std::string_view name) {
  ExpansionFactors f;
  if (name == "X2D") return f;
  if (name == "X3D-XS") {
    f.gamma_tau = 12.0;
    f.gamma_t = 4.0;
    f.gamma_s = std::sqrt(2.0);
    f.gamma_b = 2.25;
    f.gamma_d = 2.2;
    return f;
  }
  if (name == "X3D-S") {
    f.gamma_tau = 6.0;
    f.gamma_t = 13.0;
    f.gamma_s = std::sqrt(2.0);
    f.gamma_b = 2.25;
    f.gamma_d = 2.2;
    return f;
  }
  if (name == "X3D-M") {
    f.gamma_tau = 5.0;
    f.gamma_t = 16.0;
    f.gamma_s = 2.0;
    f.gamma_b = 2.25;
    f.gamma_d = 2.2;
    return f;
  }
  if (name == "X3D-XL") {
    f.gamma_tau = 5.0;
    f.gamma_t = 16.0;
    f.gamma_s = 2.0 * std::sqrt(2.0);
    // Published as width 2.9 over the no-expansion ladder; internally the
    // unit is the X2D ladder, so the stored factor is 2.9 / 2.
    f.gamma_w = 1.45;
    f.gamma_b = 2.25;
    f.gamma_d = 5.0;
    f.resolution_override = 312;
    return f;
  }
  throw ValidationError("unknown preset: " + std::string(name));
}

}  // namespace x3df
