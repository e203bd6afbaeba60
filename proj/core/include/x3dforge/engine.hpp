#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/tensor.hpp"

namespace x3df {

/// One named parameter array of a layer (kernel, gamma, beta, weight, ...).
struct NamedArray {
  std::string name;
  std::vector<float> data;
};

using LayerWeights = std::vector<NamedArray>;

/// Every parameterized layer of an ArchSpec, in execution order.
/// Same seed, same spec: bit-identical content.
struct WeightBundle {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, LayerWeights>> layers;

  const LayerWeights* find(const std::string& layer_id) const;
  const std::vector<float>& array(const std::string& layer_id,
                                  const std::string& array_name) const;
  std::int64_t element_count() const;
};

struct EngineOptions {
  int threads = 1;  // worker threads; results are identical for any count
};

/// Deterministic pseudo-random weights: conv / fc / SE weights drawn
/// zero-mean uniform scaled by 1/sqrt(fan_in), biases zero, normalization
/// affine pairs (1, 0).
WeightBundle init_weights(const ArchSpec& spec, std::uint64_t seed);

/// Direct cross-correlation with zero padding. kernel dims are
/// {out_c, in_c / groups, kt, kh, kw}. Per-element accumulation order is
/// fixed (input channel, then kernel offsets), so results do not depend on
/// the thread count.
Tensor5 conv3d(const Tensor5& input, const Tensor5& kernel,
               std::array<int, 3> stride, std::array<int, 3> padding,
               int groups, const EngineOptions& opts = {});

/// One residual block: narrow conv, normalized channel-wise spatio-temporal
/// conv (SE-gated when flagged), widening conv, shortcut add, ReLU.
/// weight arrays are looked up under id_prefix (e.g. "res3.b1").
Tensor5 block_forward(const BlockSpec& block, const Tensor5& input,
                      const WeightBundle& weights, const std::string& id_prefix,
                      const ArchConfig& config, const EngineOptions& opts = {});

/// Globally average-pooled post-conv5 activations, one row of length
/// head.conv5_width per sample. Returned as {N, C, 1, 1, 1}.
Tensor5 features(const ArchSpec& spec, const WeightBundle& weights,
                 const Tensor5& clip, const EngineOptions& opts = {});

/// Class logits, {N, num_classes, 1, 1, 1}.
Tensor5 forward(const ArchSpec& spec, const WeightBundle& weights,
                const Tensor5& clip, const EngineOptions& opts = {});

struct TracedForward {
  Tensor5 logits;
  ShapeTrace trace;  // recorded activation sizes, same ids as propagate_shapes
};

TracedForward forward_traced(const ArchSpec& spec, const WeightBundle& weights,
                             const Tensor5& clip,
                             const EngineOptions& opts = {});

}  // namespace x3df
