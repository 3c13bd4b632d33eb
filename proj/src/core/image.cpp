#include "latentdub/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latentdub {

Tensor image_to_tensor(const Image& img) {
  Tensor t({3, img.h, img.w});
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

Image tensor_to_image(const Tensor& t, bool clip01) {
  if (t.ndim() != 3 || t.dim(0) != 3) throw std::invalid_argument("tensor_to_image: need [3,H,W]");
  Image img(t.dim(1), t.dim(2));
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = t.at(c, y, x);
        img.at(y, x, c) = clip01 ? std::clamp(v, 0.0, 1.0) : v;
      }
  return img;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.empty() || out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bilinear: empty input or output");
  if (out_h == src.h && out_w == src.w) return src;  // bit-exact path
  Image dst(out_h, out_w);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, src.h - 1);
    int y1c = std::clamp(y0 + 1, 0, src.h - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, src.w - 1);
      int x1c = std::clamp(x0 + 1, 0, src.w - 1);
      for (int c = 0; c < 3; ++c) {
        double top = src.at(y0c, x0c, c) * (1 - wx) + src.at(y0c, x1c, c) * wx;
        double bot = src.at(y1c, x0c, c) * (1 - wx) + src.at(y1c, x1c, c) * wx;
        dst.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

double mean_abs_diff(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("mean_abs_diff: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.px.size(); ++i) s += std::fabs(a.px[i] - b.px[i]);
  return s / static_cast<double>(a.px.size());
}

}  // namespace latentdub
