#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace x3df {

/// Dense 5-d float tensor, row-major in {N, C, T, H, W} order.
struct Tensor5 {
  int n = 0, c = 0, t = 0, h = 0, w = 0;
  std::vector<float> values;

  Tensor5() = default;
  Tensor5(int n_, int c_, int t_, int h_, int w_)
      : n(n_), c(c_), t(t_), h(h_), w(w_),
        values(static_cast<std::size_t>(n_) * c_ * t_ * h_ * w_, 0.0f) {
    if (n_ < 1 || c_ < 1 || t_ < 1 || h_ < 1 || w_ < 1) {
      throw std::invalid_argument("Tensor5 dims must be >= 1");
    }
  }

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }

  std::size_t index(int in, int ic, int it, int ih, int iw) const {
    return (((static_cast<std::size_t>(in) * c + ic) * t + it) * h + ih) * w +
           iw;
  }

  float& at(int in, int ic, int it, int ih, int iw) {
    return values[index(in, ic, it, ih, iw)];
  }
  float at(int in, int ic, int it, int ih, int iw) const {
    return values[index(in, ic, it, ih, iw)];
  }

  float* channel(int in, int ic) { return values.data() + index(in, ic, 0, 0, 0); }
  const float* channel(int in, int ic) const {
    return values.data() + index(in, ic, 0, 0, 0);
  }

  bool same_shape(const Tensor5& o) const {
    return n == o.n && c == o.c && t == o.t && h == o.h && w == o.w;
  }
};

}  // namespace x3df
