#include <cmath>

#include "hma/imaging.hpp"

namespace hma {

double cubic_kernel(double t) {
  constexpr double a = -0.5;
  const double x = std::abs(t);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::vector<ResampleTap> resample_taps(int in_size, int out_size, bool antialias, double scale) {
  if (in_size <= 0 || out_size <= 0) throw ShapeError("resample: sizes must be positive");
  if (scale <= 0.0) scale = static_cast<double>(out_size) / in_size;
  const bool stretch = antialias && scale < 1.0;
  const double width = stretch ? 4.0 / scale : 4.0;
  const int taps = static_cast<int>(std::ceil(width)) + 2;
  std::vector<ResampleTap> out(static_cast<size_t>(out_size));
  for (int i = 0; i < out_size; ++i) {
    const double x = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(x - width / 2.0));
    ResampleTap& tap = out[static_cast<size_t>(i)];
    double total = 0.0;
    for (int j = 0; j < taps; ++j) {
      const int idx = left + j;
      const double d = x - idx;
      const double wgt = stretch ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      if (wgt == 0.0) continue;
      tap.index.push_back(std::clamp(idx, 0, in_size - 1));
      tap.weight.push_back(wgt);
      total += wgt;
    }
    for (auto& w : tap.weight) w /= total;
  }
  return out;
}

namespace {

ImageF32 resize_with(const ImageF32& img, int out_h, int out_w, const std::vector<ResampleTap>& ty,
                     const std::vector<ResampleTap>& tx) {
  const int c = img.channels;
  std::vector<double> mid(static_cast<size_t>(out_h) * img.width * c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    const auto& t = ty[static_cast<size_t>(y)];
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t k = 0; k < t.index.size(); ++k) acc += t.weight[k] * img.at(t.index[k], x, ch);
        mid[(static_cast<size_t>(y) * img.width + x) * c + ch] = acc;
      }
  }
  ImageF32 out(out_w, out_h, c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto& t = tx[static_cast<size_t>(x)];
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t k = 0; k < t.index.size(); ++k)
          acc += t.weight[k] * mid[(static_cast<size_t>(y) * img.width + t.index[k]) * c + ch];
        out.at(y, x, ch) = static_cast<float>(acc);
      }
    }
  return out;
}

}  // namespace

ImageF32 bicubic_resize(const ImageF32& img, int out_h, int out_w, bool antialias) {
  if (out_h <= 0 || out_w <= 0) throw ShapeError("bicubic_resize: target dimensions must be positive");
  return resize_with(img, out_h, out_w, resample_taps(img.height, out_h, antialias),
                     resample_taps(img.width, out_w, antialias));
}

ImageF32 bicubic_degrade(const ImageF32& img, int scale) {
  if (scale < 2) throw ShapeError("bicubic_degrade: scale must be at least 2");
  const int out_h = (img.height + scale - 1) / scale;
  const int out_w = (img.width + scale - 1) / scale;
  const double s = 1.0 / scale;
  return resize_with(img, out_h, out_w, resample_taps(img.height, out_h, true, s),
                     resample_taps(img.width, out_w, true, s));
}

}  // namespace hma
