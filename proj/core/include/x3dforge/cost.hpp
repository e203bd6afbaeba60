#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "x3dforge/arch.hpp"

namespace x3df {

struct ShapeEntry {
  std::string layer_id;  // data, conv1, res2.b0, ..., conv5, pool5, fc1, fc2
  int out_t = 0;
  int out_h = 0;
  int out_w = 0;
  int out_c = 0;

  bool operator==(const ShapeEntry&) const = default;
};

/// Ordered per-layer output sizes. Entries up to and including conv5 form
/// the trunk; pool5 and the fc layers live behind the global pool and
/// collapse to 1x1x1.
struct ShapeTrace {
  std::vector<ShapeEntry> entries;

  const ShapeEntry* find(const std::string& layer_id) const;
  // Output of a stage = its last block entry; also accepts data/conv1/...
  const ShapeEntry* stage_output(const std::string& stage_name) const;
  bool is_trunk(const ShapeEntry& entry) const;
};

struct CostPair {
  std::int64_t flops = 0;   // fused multiply-adds
  std::int64_t params = 0;

  CostPair& operator+=(const CostPair& o) {
    flops += o.flops;
    params += o.params;
    return *this;
  }
  bool operator==(const CostPair&) const = default;
};

/// Multiply-add and parameter totals with per-stage and per-category
/// breakdowns; both breakdowns sum to the totals.
struct ComplexityReport {
  std::int64_t flops_madds = 0;  // single clip, single crop
  std::int64_t params = 0;
  std::map<std::string, CostPair> per_stage;     // conv1, res2..res5, head
  std::map<std::string, CostPair> per_category;  // conv, fc, se, norm
};

enum class InferenceStrategy { kCenter, kLeftCenterRight };

struct InferenceCost {
  std::int64_t per_view_flops = 0;
  int views = 0;
  std::int64_t total = 0;
  int crop = 0;  // square crop side used per view
};

/// Per-layer output sizes using out = floor((in + 2p - k) / s) + 1 with
/// p = (k - 1) / 2. Throws ValidationError when a dimension collapses to 0.
ShapeTrace propagate_shapes(const ArchSpec& spec);

/// Fused multiply-adds for a single clip. Conv and fc layers only; a
/// channel-wise conv divides by its group count. Head fc layers are
/// accounted once per input frame so the total stays exactly linear in T.
std::int64_t count_flops(const ArchSpec& spec);

/// Learnable parameter count: conv kernels, fc weights and biases, SE
/// weights and biases, normalization affine pairs. No running statistics.
std::int64_t count_params(const ArchSpec& spec);

/// Multi-view inference cost. Center strategy evaluates the spec at its
/// native resolution, one view per clip. LeftCenterRight takes 3 crops per
/// clip at the test crop (native resolution * 8/7, i.e. 128 * gamma_s,
/// rounded to the nearest multiple of 8) and re-propagates shapes there.
InferenceCost inference_cost(const ArchSpec& spec, InferenceStrategy strategy,
                             int clips);

/// Full complexity report; totals equal count_flops / count_params.
ComplexityReport report(const ArchSpec& spec);

/// Activation elements a single-clip evaluation touches (data plus every
/// conv output). Used as the memory guard for engine-backed criteria.
std::int64_t activation_elements(const ArchSpec& spec);

}  // namespace x3df
