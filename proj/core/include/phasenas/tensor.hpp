#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace phasenas {

// Dense NCHW float tensor. Scoring runs the forward pass in 32-bit floats;
// reductions that feed the score are accumulated in doubles by the callers.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t size() const { return data.size(); }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
  }

  float& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  float at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

  float* plane(int in, int ic) { return data.data() + index(in, ic, 0, 0); }
  const float* plane(int in, int ic) const { return data.data() + index(in, ic, 0, 0); }

  bool same_shape(const Tensor& other) const {
    return n == other.n && c == other.c && h == other.h && w == other.w;
  }
};

}  // namespace phasenas
