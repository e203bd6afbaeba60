#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace x3df {

// The six expansion axes of the X3D family.
enum class Axis : int {
  kFast = 0,    // frame rate (sampling stride gamma_tau), clip duration held
  kTemporal,    // frames and frame rate together (duration grows)
  kSpatial,     // input resolution gamma_s
  kWidth,       // global width gamma_w
  kBottleneck,  // inner block width gamma_b
  kDepth,       // blocks per stage gamma_d
};

inline constexpr std::array<Axis, 6> kAllAxes = {
    Axis::kFast,   Axis::kTemporal,   Axis::kSpatial,
    Axis::kWidth,  Axis::kBottleneck, Axis::kDepth};

std::string_view axis_name(Axis axis);
std::optional<Axis> axis_from_name(std::string_view name);

/// The six gamma knobs plus per-axis cumulative expansion magnitude E_a.
/// Unit factors (all 1) describe the single-frame X2D base network.
struct ExpansionFactors {
  double gamma_tau = 1.0;  // temporal sampling stride of the data layer
  double gamma_t = 1.0;    // number of input frames
  double gamma_s = 1.0;    // spatial resolution multiplier over the 112 px base
  double gamma_w = 1.0;    // global width multiplier (1.0 = base widths 24..192)
  double gamma_b = 1.0;    // bottleneck width multiplier
  double gamma_d = 1.0;    // depth multiplier over base stage depths

  // Explicit input resolution for presets whose published size does not
  // follow the nearest-multiple-of-8 rule. 0 means "no override".
  int resolution_override = 0;

  // Cumulative expansion magnitude per axis, starting at 1.0. Pure
  // bookkeeping for criteria and trajectory logs.
  std::array<double, 6> cumulative = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  double cumulative_for(Axis axis) const {
    return cumulative[static_cast<int>(axis)];
  }

  bool operator==(const ExpansionFactors&) const = default;
};

// Returns a message per violated ExpansionFactors invariant (factors > 0,
// cumulative >= 1).
std::vector<std::string> validate_factors(const ExpansionFactors& factors);

// Layer categories that contribute to multiply-add / parameter totals.
// kConvAndFc: convolution and fully connected layers count; normalization,
// activations, SE gating and pooling cost zero multiply-adds.
enum class CountConvention { kConvAndFc };

struct ArchConfig {
  int num_classes = 400;
  int head_width = 2048;  // fc1 width, fixed across the family
  bool use_channelwise = true;  // center 3x3^2 conv is channel-wise separable
  bool use_se = true;
  int se_every = 2;             // SE in every se_every-th block (0-based phase)
  double se_ratio = 1.0 / 16.0;
  bool use_swish = true;
  CountConvention count_convention = CountConvention::kConvAndFc;

  bool operator==(const ArchConfig&) const = default;
};

std::vector<std::string> validate_config(const ArchConfig& config);

struct InputGeometry {
  int frames = 1;      // T
  int stride = 1;      // source frames per sampled frame
  int resolution = 112;  // square crop side S

  bool operator==(const InputGeometry&) const = default;
};

struct StageSpec {
  std::string name;          // res2 .. res5
  int block_count = 1;
  int out_width = 0;
  int bottleneck_width = 0;
  int spatial_stride = 2;    // carried by the center conv of the first block
  int temporal_stride = 1;   // never anything else

  bool operator==(const StageSpec&) const = default;
};

/// One residual block, fully resolved.
struct BlockSpec {
  int in_width = 0;
  int bottleneck_width = 0;
  int out_width = 0;
  int spatial_stride = 1;  // 1 or 2
  bool has_se = false;
  bool has_projection_shortcut = false;

  bool operator==(const BlockSpec&) const = default;
};

struct HeadSpec {
  int conv5_width = 0;
  int fc1_width = 0;
  int num_classes = 0;

  bool operator==(const HeadSpec&) const = default;
};

/// Fully resolved layer-by-layer network description. Instantiated from
/// ExpansionFactors; immutable value type afterwards.
struct ArchSpec {
  InputGeometry input;
  int conv1_width = 0;
  std::vector<StageSpec> stages;
  HeadSpec head;
  ArchConfig config;
  ExpansionFactors factors;  // the factors this spec was instantiated from

  // Per-block resolution of a stage (in-widths, strides, SE and shortcut
  // flags). prev_width is the width entering the stage.
  std::vector<BlockSpec> blocks(std::size_t stage_index) const;

  // Width entering stage stage_index (conv1 width for res2).
  int stage_in_width(std::size_t stage_index) const;

  bool operator==(const ArchSpec&) const = default;
};

/// Rounds base_width * multiplier to a multiple of divisor, at least
/// divisor, bumping up one divisor when plain rounding loses more than
/// 10% of the requested width.
int round_width(int base_width, double multiplier, int divisor = 8);

/// Number of blocks for a stage: ceil(base_repeats * gamma_d), with a
/// relative epsilon so rational products that land on an integer
/// (e.g. 5 * 2.2) do not spill over.
int round_depth(int base_repeats, double gamma_d);

/// Clip geometry from factors: frames and stride to nearest integer
/// (clamped >= 1), resolution to the nearest multiple of 8 of
/// 112 * gamma_s unless the factors carry an explicit override.
InputGeometry resolve_input_geometry(const ExpansionFactors& factors);

/// Deterministically expands factors into a complete ArchSpec.
/// Throws ValidationError for factors that collapse the activation
/// geometry (res5 below 4 px or T < 1) and for invalid configs.
ArchSpec instantiate(const ExpansionFactors& factors,
                     const ArchConfig& config = {});

/// Structural invariant check; returns one human-readable message per
/// violation, empty when the spec is well formed.
std::vector<std::string> validate(const ArchSpec& spec);

// ---- Named presets ------------------------------------------------------

std::vector<std::string> preset_names();
bool is_preset(std::string_view name);

/// Factors for X2D, X3D-XS, X3D-S, X3D-M, X3D-XL.
/// Throws ValidationError for unknown names.
ExpansionFactors preset_factors(std::string_view name);

}  // namespace x3df
