#pragma once

#include <cstdint>
#include <vector>

#include "latentdub/core/tensor.hpp"

namespace latentdub {

// RGB image, doubles in [0,1], row-major interleaved (y, x, channel).
struct Image {
  int h = 0, w = 0;
  std::vector<double> px;

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_ * 3, 0.0) {}

  double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  bool empty() const { return h == 0 || w == 0; }
};

// [3,H,W] <-> interleaved conversions
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t, bool clip01 = true);

// Bilinear resize. When the source and destination sizes match the copy is
// bit-exact (no resampling arithmetic).
Image resize_bilinear(const Image& src, int out_h, int out_w);

double mean_abs_diff(const Image& a, const Image& b);

}  // namespace latentdub
