#include "x3dforge/cost.hpp"

#include <cmath>

#include "x3dforge/errors.hpp"

namespace x3df {

namespace {

constexpr const char* kCatConv = "conv";
constexpr const char* kCatFc = "fc";
constexpr const char* kCatSe = "se";
constexpr const char* kCatNorm = "norm";

int conv_out_size(int in, int kernel, int stride) {
  const int pad = (kernel - 1) / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

int se_reduced_width(int bottleneck_width, double se_ratio) {
  return std::max(1, static_cast<int>(bottleneck_width * se_ratio));
}

// One counted layer. Normalization and SE carry zero multiply-adds by
// convention; they still own parameters.
struct CostItem {
  std::string stage;     // conv1, res2..res5, head
  std::string category;  // conv, fc, se, norm
  std::int64_t flops = 0;
  std::int64_t params = 0;
  std::int64_t out_elems = 0;
};

struct Walker {
  const ArchSpec& spec;
  std::vector<CostItem> items;

  void conv(const std::string& stage, std::int64_t out_elems, int out_c,
            int in_c, int groups, int kernel_volume) {
    const std::int64_t per_output =
        static_cast<std::int64_t>(kernel_volume) * (in_c / groups);
    items.push_back({stage, kCatConv, out_elems * per_output,
                     static_cast<std::int64_t>(out_c) * (in_c / groups) *
                         kernel_volume,
                     out_elems});
  }

  void norm(const std::string& stage, int channels) {
    items.push_back({stage, kCatNorm, 0, 2LL * channels});
  }

  void se(const std::string& stage, int channels, double ratio) {
    const int reduced = se_reduced_width(channels, ratio);
    const std::int64_t weights =
        static_cast<std::int64_t>(reduced) * channels * 2;
    const std::int64_t biases = reduced + channels;
    items.push_back({stage, kCatSe, 0, weights + biases});
  }

  void fc(const std::string& stage, int out_features, int in_features,
          int frames) {
    items.push_back({stage, kCatFc,
                     static_cast<std::int64_t>(frames) * out_features *
                         in_features,
                     static_cast<std::int64_t>(out_features) * in_features +
                         out_features});
  }
};

std::int64_t elems(int c, int t, int h, int w) {
  return static_cast<std::int64_t>(c) * t * h * w;
}

// Enumerates every counted layer of the network in execution order.
std::vector<CostItem> walk(const ArchSpec& spec) {
  if (auto bad = validate(spec); !bad.empty()) {
    throw ValidationError("cannot cost an invalid spec: " + bad.front());
  }
  Walker w{spec, {}};
  const int frames = spec.input.frames;
  const int in_size = spec.input.resolution;

  // Stem: spatial 1x3x3 stride (1,2,2) from RGB, then temporal 3x1x1
  // channel-wise, each followed by normalization.
  const int stem_size = conv_out_size(in_size, 3, 2);
  w.conv("conv1", elems(spec.conv1_width, frames, stem_size, stem_size),
         spec.conv1_width, 3, 1, 9);
  w.norm("conv1", spec.conv1_width);
  w.conv("conv1", elems(spec.conv1_width, frames, stem_size, stem_size),
         spec.conv1_width, spec.conv1_width, spec.conv1_width, 3);
  w.norm("conv1", spec.conv1_width);

  int size = stem_size;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const StageSpec& stage = spec.stages[s];
    for (const BlockSpec& block : spec.blocks(s)) {
      const int pre = size;
      const int post = conv_out_size(pre, 3, block.spatial_stride);
      const int inner = block.bottleneck_width;
      if (spec.config.use_channelwise) {
        // 1x1x1 in->inner, channel-wise 3x3x3 (spatial stride), 1x1x1
        // inner->out.
        w.conv(stage.name, elems(inner, frames, pre, pre), inner,
               block.in_width, 1, 1);
        w.norm(stage.name, inner);
        w.conv(stage.name, elems(inner, frames, post, post), inner, inner,
               inner, 27);
        w.norm(stage.name, inner);
      } else {
        // Dense fallback: temporal 3x1x1 in->inner, spatial 1x3x3 with the
        // block stride, both full-channel.
        w.conv(stage.name, elems(inner, frames, pre, pre), inner,
               block.in_width, 1, 3);
        w.norm(stage.name, inner);
        w.conv(stage.name, elems(inner, frames, post, post), inner, inner, 1,
               9);
        w.norm(stage.name, inner);
      }
      if (block.has_se) w.se(stage.name, inner, spec.config.se_ratio);
      w.conv(stage.name, elems(block.out_width, frames, post, post),
             block.out_width, inner, 1, 1);
      w.norm(stage.name, block.out_width);
      if (block.has_projection_shortcut) {
        w.conv(stage.name, elems(block.out_width, frames, post, post),
               block.out_width, block.in_width, 1, 1);
        w.norm(stage.name, block.out_width);
      }
      size = post;
    }
  }

  // Head: conv5 1x1x1 + norm at res5 resolution, global pool, two fc
  // layers. The fc cost is accounted per input frame, keeping clip cost
  // exactly linear in T.
  w.conv("head", elems(spec.head.conv5_width, frames, size, size),
         spec.head.conv5_width, spec.stages.back().out_width, 1, 1);
  w.norm("head", spec.head.conv5_width);
  w.fc("head", spec.head.fc1_width, spec.head.conv5_width, frames);
  w.fc("head", spec.head.num_classes, spec.head.fc1_width, frames);
  return w.items;
}

}  // namespace

const ShapeEntry* ShapeTrace::find(const std::string& layer_id) const {
  for (const ShapeEntry& e : entries) {
    if (e.layer_id == layer_id) return &e;
  }
  return nullptr;
}

const ShapeEntry* ShapeTrace::stage_output(const std::string& name) const {
  const ShapeEntry* last = nullptr;
  for (const ShapeEntry& e : entries) {
    if (e.layer_id == name) last = &e;
    if (e.layer_id.starts_with(name + ".b")) last = &e;
  }
  return last;
}

bool ShapeTrace::is_trunk(const ShapeEntry& entry) const {
  return entry.layer_id != "pool5" && entry.layer_id != "fc1" &&
         entry.layer_id != "fc2";
}

ShapeTrace propagate_shapes(const ArchSpec& spec) {
  if (auto bad = validate(spec); !bad.empty()) {
    throw ValidationError("cannot propagate an invalid spec: " + bad.front());
  }
  ShapeTrace trace;
  const int frames = spec.input.frames;
  int size = spec.input.resolution;
  trace.entries.push_back({"data", frames, size, size, 3});

  size = conv_out_size(size, 3, 2);
  if (size < 1) throw ValidationError("conv1 output size collapsed to 0");
  trace.entries.push_back({"conv1", frames, size, size, spec.conv1_width});

  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const StageSpec& stage = spec.stages[s];
    const auto blocks = spec.blocks(s);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      size = conv_out_size(size, 3, blocks[b].spatial_stride);
      if (size < 1) {
        throw ValidationError(stage.name + " output size collapsed to 0");
      }
      trace.entries.push_back({stage.name + ".b" + std::to_string(b), frames,
                               size, size, blocks[b].out_width});
    }
  }
  trace.entries.push_back({"conv5", frames, size, size,
                           spec.head.conv5_width});
  trace.entries.push_back({"pool5", 1, 1, 1, spec.head.conv5_width});
  trace.entries.push_back({"fc1", 1, 1, 1, spec.head.fc1_width});
  trace.entries.push_back({"fc2", 1, 1, 1, spec.head.num_classes});
  return trace;
}

std::int64_t count_flops(const ArchSpec& spec) {
  std::int64_t total = 0;
  for (const CostItem& item : walk(spec)) total += item.flops;
  return total;
}

std::int64_t count_params(const ArchSpec& spec) {
  std::int64_t total = 0;
  for (const CostItem& item : walk(spec)) total += item.params;
  return total;
}

InferenceCost inference_cost(const ArchSpec& spec, InferenceStrategy strategy,
                             int clips) {
  if (clips < 1) throw ValidationError("clips must be >= 1");
  InferenceCost cost;
  if (strategy == InferenceStrategy::kCenter) {
    cost.crop = spec.input.resolution;
    cost.per_view_flops = count_flops(spec);
    cost.views = clips;
  } else {
    // Test crop 128 * gamma_s, nearest multiple of 8, shapes re-propagated.
    cost.crop =
        8 * static_cast<int>(std::llround(128.0 * spec.factors.gamma_s / 8.0));
    ArchSpec cropped = spec;
    cropped.input.resolution = cost.crop;
    cost.per_view_flops = count_flops(cropped);
    cost.views = 3 * clips;
  }
  cost.total = cost.per_view_flops * cost.views;
  return cost;
}

std::int64_t activation_elements(const ArchSpec& spec) {
  std::int64_t total = 3LL * spec.input.frames * spec.input.resolution *
                       spec.input.resolution;
  for (const CostItem& item : walk(spec)) total += item.out_elems;
  return total;
}

ComplexityReport report(const ArchSpec& spec) {
  ComplexityReport rep;
  for (const char* cat : {kCatConv, kCatFc, kCatSe, kCatNorm}) {
    rep.per_category[cat] = {};
  }
  for (const CostItem& item : walk(spec)) {
    rep.flops_madds += item.flops;
    rep.params += item.params;
    CostPair& stage = rep.per_stage[item.stage];
    stage.flops += item.flops;
    stage.params += item.params;
    CostPair& cat = rep.per_category[item.category];
    cat.flops += item.flops;
    cat.params += item.params;
  }
  return rep;
}

}  // namespace x3df
