#include "x3dforge/engine.hpp"

#include <algorithm>
#include <cmath>

#include "x3dforge/errors.hpp"
#include "x3dforge/parallel.hpp"
#include "x3dforge/rng.hpp"

namespace x3df {

namespace {

int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void fill_uniform(std::vector<float>& data, Rng& rng, std::int64_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& v : data) v = rng.next_uniform(bound);
}

struct BundleBuilder {
  WeightBundle bundle;
  Rng rng;

  explicit BundleBuilder(std::uint64_t seed) : rng(seed) {
    bundle.seed = seed;
  }

  LayerWeights& layer(const std::string& id) {
    bundle.layers.emplace_back(id, LayerWeights{});
    return bundle.layers.back().second;
  }

  void conv(const std::string& id, int out_c, int in_c_per_group, int kt,
            int kh, int kw) {
    LayerWeights& lw = layer(id);
    NamedArray kernel{"kernel", std::vector<float>(
        static_cast<std::size_t>(out_c) * in_c_per_group * kt * kh * kw)};
    fill_uniform(kernel.data, rng,
                 static_cast<std::int64_t>(in_c_per_group) * kt * kh * kw);
    lw.push_back(std::move(kernel));
  }

  void norm(const std::string& id, int channels) {
    LayerWeights& lw = layer(id);
    lw.push_back({"gamma", std::vector<float>(channels, 1.0f)});
    lw.push_back({"beta", std::vector<float>(channels, 0.0f)});
  }

  void se(const std::string& id, int channels, int reduced) {
    LayerWeights& lw = layer(id);
    NamedArray rw{"reduce_w", std::vector<float>(
        static_cast<std::size_t>(reduced) * channels)};
    fill_uniform(rw.data, rng, channels);
    lw.push_back(std::move(rw));
    lw.push_back({"reduce_b", std::vector<float>(reduced, 0.0f)});
    NamedArray ew{"expand_w", std::vector<float>(
        static_cast<std::size_t>(channels) * reduced)};
    fill_uniform(ew.data, rng, reduced);
    lw.push_back(std::move(ew));
    lw.push_back({"expand_b", std::vector<float>(channels, 0.0f)});
  }

  void fc(const std::string& id, int out_features, int in_features) {
    LayerWeights& lw = layer(id);
    NamedArray weight{"weight", std::vector<float>(
        static_cast<std::size_t>(out_features) * in_features)};
    fill_uniform(weight.data, rng, in_features);
    lw.push_back(std::move(weight));
    lw.push_back({"bias", std::vector<float>(out_features, 0.0f)});
  }
};

int se_reduced_width(int bottleneck_width, double se_ratio) {
  return std::max(1, static_cast<int>(bottleneck_width * se_ratio));
}

// y = gamma * x + beta. Inference-mode normalization with identity
// statistics, i.e. a per-channel affine map.
void apply_norm(Tensor5& x, const std::vector<float>& gamma,
                const std::vector<float>& beta) {
  if (static_cast<int>(gamma.size()) != x.c ||
      static_cast<int>(beta.size()) != x.c) {
    throw ValidationError("normalization affine size mismatch");
  }
  const std::int64_t plane = static_cast<std::int64_t>(x.t) * x.h * x.w;
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      float* row = x.channel(in, ic);
      const float g = gamma[ic];
      const float b = beta[ic];
      for (std::int64_t i = 0; i < plane; ++i) row[i] = g * row[i] + b;
    }
  }
}

void apply_relu(Tensor5& x) {
  for (float& v : x.values) v = v > 0.0f ? v : 0.0f;
}

inline float sigmoidf(float v) { return 1.0f / (1.0f + std::exp(-v)); }

void apply_swish(Tensor5& x) {
  for (float& v : x.values) v = v * sigmoidf(v);
}

void apply_activation(Tensor5& x, bool swish) {
  if (swish) {
    apply_swish(x);
  } else {
    apply_relu(x);
  }
}

// Squeeze-and-excitation: global average pool, reduce fc + ReLU, expand fc
// + sigmoid, channel-wise scale.
void apply_se(Tensor5& x, const LayerWeights& lw, int reduced) {
  const std::vector<float>* reduce_w = nullptr;
  const std::vector<float>* reduce_b = nullptr;
  const std::vector<float>* expand_w = nullptr;
  const std::vector<float>* expand_b = nullptr;
  for (const NamedArray& a : lw) {
    if (a.name == "reduce_w") reduce_w = &a.data;
    if (a.name == "reduce_b") reduce_b = &a.data;
    if (a.name == "expand_w") expand_w = &a.data;
    if (a.name == "expand_b") expand_b = &a.data;
  }
  if (!reduce_w || !reduce_b || !expand_w || !expand_b) {
    throw ValidationError("SE weight arrays missing");
  }
  const int channels = x.c;
  const std::int64_t plane = static_cast<std::int64_t>(x.t) * x.h * x.w;
  std::vector<float> pooled(channels);
  std::vector<float> gate(channels);
  std::vector<float> hidden(reduced);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < channels; ++ic) {
      const float* row = x.channel(in, ic);
      float acc = 0.0f;
      for (std::int64_t i = 0; i < plane; ++i) acc += row[i];
      pooled[ic] = acc / static_cast<float>(plane);
    }
    for (int r = 0; r < reduced; ++r) {
      float acc = (*reduce_b)[r];
      const float* wrow = reduce_w->data() + static_cast<std::size_t>(r) * channels;
      for (int ic = 0; ic < channels; ++ic) acc += wrow[ic] * pooled[ic];
      hidden[r] = acc > 0.0f ? acc : 0.0f;
    }
    for (int ic = 0; ic < channels; ++ic) {
      float acc = (*expand_b)[ic];
      const float* wrow = expand_w->data() + static_cast<std::size_t>(ic) * reduced;
      for (int r = 0; r < reduced; ++r) acc += wrow[r] * hidden[r];
      gate[ic] = sigmoidf(acc);
    }
    for (int ic = 0; ic < channels; ++ic) {
      float* row = x.channel(in, ic);
      const float g = gate[ic];
      for (std::int64_t i = 0; i < plane; ++i) row[i] *= g;
    }
  }
}

Tensor5 conv3d_raw(const Tensor5& input, const float* kernel, int out_c,
                   int in_c_per_group, int kt, int kh, int kw,
                   std::array<int, 3> stride, std::array<int, 3> padding,
                   int groups, int threads) {
  if (groups < 1 || input.c % groups != 0) {
    throw ValidationError("input channels not divisible by groups");
  }
  if (input.c / groups != in_c_per_group) {
    throw ValidationError("kernel channel count inconsistent with groups");
  }
  if (out_c % groups != 0) {
    throw ValidationError("output channels not divisible by groups");
  }
  const int ot = conv_out_size(input.t, kt, stride[0], padding[0]);
  const int oh = conv_out_size(input.h, kh, stride[1], padding[1]);
  const int ow = conv_out_size(input.w, kw, stride[2], padding[2]);
  if (ot < 1 || oh < 1 || ow < 1) {
    throw ValidationError("convolution output dimension collapsed to 0");
  }
  Tensor5 out(input.n, out_c, ot, oh, ow);

  const int out_c_per_group = out_c / groups;
  const std::int64_t kernel_stride =
      static_cast<std::int64_t>(in_c_per_group) * kt * kh * kw;
  const bool pointwise = kt == 1 && kh == 1 && kw == 1 && stride[0] == 1 &&
                         stride[1] == 1 && stride[2] == 1;

  // One task per (sample, output channel); tasks write disjoint slices and
  // each output element accumulates in a fixed order, so any thread count
  // produces the same bits.
  parallel_for(static_cast<std::int64_t>(input.n) * out_c, threads,
               [&](std::int64_t task) {
    const int in = static_cast<int>(task / out_c);
    const int co = static_cast<int>(task % out_c);
    const int g = co / out_c_per_group;
    const float* kbase = kernel + co * kernel_stride;
    float* out_row = out.channel(in, co);

    if (pointwise) {
      const std::int64_t plane = static_cast<std::int64_t>(ot) * oh * ow;
      for (int cig = 0; cig < in_c_per_group; ++cig) {
        const float kv = kbase[cig];
        const float* in_row = input.channel(in, g * in_c_per_group + cig);
        for (std::int64_t i = 0; i < plane; ++i) out_row[i] += kv * in_row[i];
      }
      return;
    }

    for (int cig = 0; cig < in_c_per_group; ++cig) {
      const float* in_chan = input.channel(in, g * in_c_per_group + cig);
      for (int zt = 0; zt < kt; ++zt) {
        for (int zh = 0; zh < kh; ++zh) {
          for (int zw = 0; zw < kw; ++zw) {
            const float kv =
                kbase[((static_cast<std::int64_t>(cig) * kt + zt) * kh + zh) *
                          kw + zw];
            for (int t = 0; t < ot; ++t) {
              const int it = t * stride[0] + zt - padding[0];
              if (it < 0 || it >= input.t) continue;
              for (int y = 0; y < oh; ++y) {
                const int ih = y * stride[1] + zh - padding[1];
                if (ih < 0 || ih >= input.h) continue;
                // Valid output-x range for this kernel tap.
                const int off = zw - padding[2];
                int x0 = 0, x1 = ow;
                if (stride[2] == 1) {
                  x0 = std::max(0, -off);
                  x1 = std::min(ow, input.w - off);
                } else {
                  while (x0 < ow && x0 * stride[2] + off < 0) ++x0;
                  while (x1 > x0 && (x1 - 1) * stride[2] + off >= input.w) --x1;
                }
                if (x0 >= x1) continue;
                float* orow =
                    out_row + (static_cast<std::int64_t>(t) * oh + y) * ow;
                const float* irow =
                    in_chan + (static_cast<std::int64_t>(it) * input.h + ih) *
                                  input.w + off;
                if (stride[2] == 1) {
                  for (int x = x0; x < x1; ++x) orow[x] += kv * irow[x];
                } else {
                  for (int x = x0; x < x1; ++x) {
                    orow[x] += kv * irow[static_cast<std::int64_t>(x) * stride[2]];
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor5 conv_from_bundle(const Tensor5& input, const WeightBundle& weights,
                         const std::string& id, int out_c, int groups, int kt,
                         int kh, int kw, std::array<int, 3> stride,
                         const EngineOptions& opts) {
  const std::vector<float>& kernel = weights.array(id, "kernel");
  const int in_c_per_group = input.c / groups;
  const std::size_t expected = static_cast<std::size_t>(out_c) *
                               in_c_per_group * kt * kh * kw;
  if (kernel.size() != expected) {
    throw ValidationError("kernel size mismatch for layer " + id);
  }
  return conv3d_raw(input, kernel.data(), out_c, in_c_per_group, kt, kh, kw,
                    stride, {(kt - 1) / 2, (kh - 1) / 2, (kw - 1) / 2}, groups,
                    opts.threads);
}

void norm_from_bundle(Tensor5& x, const WeightBundle& weights,
                      const std::string& id) {
  apply_norm(x, weights.array(id, "gamma"), weights.array(id, "beta"));
}

// Pooled (N, C) matrix as Tensor5 {N, C, 1, 1, 1}.
Tensor5 global_average_pool(const Tensor5& x) {
  Tensor5 pooled(x.n, x.c, 1, 1, 1);
  const std::int64_t plane = static_cast<std::int64_t>(x.t) * x.h * x.w;
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      const float* row = x.channel(in, ic);
      float acc = 0.0f;
      for (std::int64_t i = 0; i < plane; ++i) acc += row[i];
      pooled.at(in, ic, 0, 0, 0) = acc / static_cast<float>(plane);
    }
  }
  return pooled;
}

Tensor5 fc_from_bundle(const Tensor5& x, const WeightBundle& weights,
                       const std::string& id, int out_features) {
  const std::vector<float>& weight = weights.array(id, "weight");
  const std::vector<float>& bias = weights.array(id, "bias");
  if (weight.size() != static_cast<std::size_t>(out_features) * x.c ||
      bias.size() != static_cast<std::size_t>(out_features)) {
    throw ValidationError("fc weight size mismatch for layer " + id);
  }
  Tensor5 out(x.n, out_features, 1, 1, 1);
  for (int in = 0; in < x.n; ++in) {
    const float* row = x.channel(in, 0);
    for (int o = 0; o < out_features; ++o) {
      const float* wrow = weight.data() + static_cast<std::size_t>(o) * x.c;
      float acc = bias[o];
      for (int i = 0; i < x.c; ++i) acc += wrow[i] * row[i];
      out.at(in, o, 0, 0, 0) = acc;
    }
  }
  return out;
}

Tensor5 stem_forward(const ArchSpec& spec, const WeightBundle& weights,
                     const Tensor5& clip, const EngineOptions& opts) {
  Tensor5 x = conv_from_bundle(clip, weights, "conv1.spatial",
                               spec.conv1_width, 1, 1, 3, 3, {1, 2, 2}, opts);
  norm_from_bundle(x, weights, "conv1.spatial.norm");
  apply_relu(x);
  x = conv_from_bundle(x, weights, "conv1.temporal", spec.conv1_width,
                       spec.conv1_width, 3, 1, 1, {1, 1, 1}, opts);
  norm_from_bundle(x, weights, "conv1.temporal.norm");
  apply_relu(x);
  return x;
}

Tensor5 trunk_forward(const ArchSpec& spec, const WeightBundle& weights,
                      const Tensor5& clip, const EngineOptions& opts,
                      ShapeTrace* trace) {
  if (clip.c != 3 || clip.t != spec.input.frames ||
      clip.h != spec.input.resolution || clip.w != spec.input.resolution) {
    throw ValidationError("clip geometry does not match spec input");
  }
  if (trace) {
    trace->entries.push_back({"data", clip.t, clip.h, clip.w, clip.c});
  }
  Tensor5 x = stem_forward(spec, weights, clip, opts);
  if (trace) trace->entries.push_back({"conv1", x.t, x.h, x.w, x.c});

  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto blocks = spec.blocks(s);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string prefix =
          spec.stages[s].name + ".b" + std::to_string(b);
      x = block_forward(blocks[b], x, weights, prefix, spec.config, opts);
      if (trace) trace->entries.push_back({prefix, x.t, x.h, x.w, x.c});
    }
  }

  x = conv_from_bundle(x, weights, "conv5", spec.head.conv5_width, 1, 1, 1, 1,
                       {1, 1, 1}, opts);
  norm_from_bundle(x, weights, "conv5.norm");
  apply_relu(x);
  if (trace) trace->entries.push_back({"conv5", x.t, x.h, x.w, x.c});
  return x;
}

}  // namespace

const LayerWeights* WeightBundle::find(const std::string& layer_id) const {
  for (const auto& [id, lw] : layers) {
    if (id == layer_id) return &lw;
  }
  return nullptr;
}

const std::vector<float>& WeightBundle::array(
    const std::string& layer_id, const std::string& array_name) const {
  const LayerWeights* lw = find(layer_id);
  if (lw) {
    for (const NamedArray& a : *lw) {
      if (a.name == array_name) return a.data;
    }
  }
  throw ValidationError("missing weight array " + layer_id + "/" + array_name);
}

std::int64_t WeightBundle::element_count() const {
  std::int64_t total = 0;
  for (const auto& [id, lw] : layers) {
    for (const NamedArray& a : lw) {
      total += static_cast<std::int64_t>(a.data.size());
    }
  }
  return total;
}

WeightBundle init_weights(const ArchSpec& spec, std::uint64_t seed) {
  if (auto bad = validate(spec); !bad.empty()) {
    throw ValidationError("cannot init weights for invalid spec: " +
                          bad.front());
  }
  BundleBuilder b(seed);
  b.conv("conv1.spatial", spec.conv1_width, 3, 1, 3, 3);
  b.norm("conv1.spatial.norm", spec.conv1_width);
  b.conv("conv1.temporal", spec.conv1_width, 1, 3, 1, 1);
  b.norm("conv1.temporal.norm", spec.conv1_width);

  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto blocks = spec.blocks(s);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const BlockSpec& block = blocks[bi];
      const std::string prefix =
          spec.stages[s].name + ".b" + std::to_string(bi);
      const int inner = block.bottleneck_width;
      if (spec.config.use_channelwise) {
        b.conv(prefix + ".conv_a", inner, block.in_width, 1, 1, 1);
        b.norm(prefix + ".conv_a.norm", inner);
        b.conv(prefix + ".conv_b", inner, 1, 3, 3, 3);
        b.norm(prefix + ".conv_b.norm", inner);
      } else {
        b.conv(prefix + ".conv_a", inner, block.in_width, 3, 1, 1);
        b.norm(prefix + ".conv_a.norm", inner);
        b.conv(prefix + ".conv_b", inner, inner, 1, 3, 3);
        b.norm(prefix + ".conv_b.norm", inner);
      }
      if (block.has_se) {
        b.se(prefix + ".se", inner,
             se_reduced_width(inner, spec.config.se_ratio));
      }
      b.conv(prefix + ".conv_c", block.out_width, inner, 1, 1, 1);
      b.norm(prefix + ".conv_c.norm", block.out_width);
      if (block.has_projection_shortcut) {
        b.conv(prefix + ".project", block.out_width, block.in_width, 1, 1, 1);
        b.norm(prefix + ".project.norm", block.out_width);
      }
    }
  }
  b.conv("conv5", spec.head.conv5_width, spec.stages.back().out_width, 1, 1,
         1);
  b.norm("conv5.norm", spec.head.conv5_width);
  b.fc("fc1", spec.head.fc1_width, spec.head.conv5_width);
  b.fc("fc2", spec.head.num_classes, spec.head.fc1_width);
  return std::move(b.bundle);
}

Tensor5 conv3d(const Tensor5& input, const Tensor5& kernel,
               std::array<int, 3> stride, std::array<int, 3> padding,
               int groups, const EngineOptions& opts) {
  return conv3d_raw(input, kernel.values.data(), kernel.n, kernel.c, kernel.t,
                    kernel.h, kernel.w, stride, padding, groups, opts.threads);
}

Tensor5 block_forward(const BlockSpec& block, const Tensor5& input,
                      const WeightBundle& weights, const std::string& id_prefix,
                      const ArchConfig& config, const EngineOptions& opts) {
  if (input.c != block.in_width) {
    throw ValidationError("block input channels do not match in_width");
  }
  const int inner = block.bottleneck_width;
  const int s = block.spatial_stride;

  Tensor5 x;
  if (config.use_channelwise) {
    x = conv_from_bundle(input, weights, id_prefix + ".conv_a", inner, 1, 1, 1,
                         1, {1, 1, 1}, opts);
    norm_from_bundle(x, weights, id_prefix + ".conv_a.norm");
    apply_activation(x, config.use_swish);
    x = conv_from_bundle(x, weights, id_prefix + ".conv_b", inner, inner, 3, 3,
                         3, {1, s, s}, opts);
    norm_from_bundle(x, weights, id_prefix + ".conv_b.norm");
  } else {
    x = conv_from_bundle(input, weights, id_prefix + ".conv_a", inner, 1, 3, 1,
                         1, {1, 1, 1}, opts);
    norm_from_bundle(x, weights, id_prefix + ".conv_a.norm");
    apply_activation(x, config.use_swish);
    x = conv_from_bundle(x, weights, id_prefix + ".conv_b", inner, 1, 1, 3, 3,
                         {1, s, s}, opts);
    norm_from_bundle(x, weights, id_prefix + ".conv_b.norm");
  }
  if (block.has_se) {
    apply_se(x, *weights.find(id_prefix + ".se"),
             se_reduced_width(inner, config.se_ratio));
  }
  apply_activation(x, config.use_swish);
  x = conv_from_bundle(x, weights, id_prefix + ".conv_c", block.out_width, 1,
                       1, 1, 1, {1, 1, 1}, opts);
  norm_from_bundle(x, weights, id_prefix + ".conv_c.norm");

  Tensor5 shortcut;
  const Tensor5* residual = &input;
  if (block.has_projection_shortcut) {
    shortcut = conv_from_bundle(input, weights, id_prefix + ".project",
                                block.out_width, 1, 1, 1, 1, {1, s, s}, opts);
    norm_from_bundle(shortcut, weights, id_prefix + ".project.norm");
    residual = &shortcut;
  }
  if (!x.same_shape(*residual)) {
    throw ValidationError("residual shape mismatch in " + id_prefix);
  }
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    x.values[i] += residual->values[i];
  }
  apply_relu(x);
  return x;
}

Tensor5 features(const ArchSpec& spec, const WeightBundle& weights,
                 const Tensor5& clip, const EngineOptions& opts) {
  return global_average_pool(trunk_forward(spec, weights, clip, opts, nullptr));
}

Tensor5 forward(const ArchSpec& spec, const WeightBundle& weights,
                const Tensor5& clip, const EngineOptions& opts) {
  Tensor5 pooled =
      global_average_pool(trunk_forward(spec, weights, clip, opts, nullptr));
  Tensor5 hidden = fc_from_bundle(pooled, weights, "fc1", spec.head.fc1_width);
  apply_relu(hidden);
  return fc_from_bundle(hidden, weights, "fc2", spec.head.num_classes);
}

TracedForward forward_traced(const ArchSpec& spec, const WeightBundle& weights,
                             const Tensor5& clip, const EngineOptions& opts) {
  TracedForward out;
  Tensor5 trunk = trunk_forward(spec, weights, clip, opts, &out.trace);
  Tensor5 pooled = global_average_pool(trunk);
  out.trace.entries.push_back({"pool5", 1, 1, 1, pooled.c});
  Tensor5 hidden = fc_from_bundle(pooled, weights, "fc1", spec.head.fc1_width);
  apply_relu(hidden);
  out.trace.entries.push_back({"fc1", 1, 1, 1, hidden.c});
  out.logits = fc_from_bundle(hidden, weights, "fc2", spec.head.num_classes);
  out.trace.entries.push_back({"fc2", 1, 1, 1, out.logits.c});
  return out;
}

}  // namespace x3df
