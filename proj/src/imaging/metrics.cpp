#include <cmath>
#include <cstdio>
#include <limits>

#include "hma/imaging.hpp"

namespace hma {
namespace {

/// Y plane as doubles after cropping `crop` pixels from every border.
std::vector<double> cropped_y(const ImageF32& img, int crop, int& h, int& w) {
  const ImageF32 y = img.channels == 3 ? rgb_to_y(img) : img;
  if (y.channels != 1) throw ShapeError("metrics expect 1 or 3 channels");
  h = y.height - 2 * crop;
  w = y.width - 2 * crop;
  if (crop < 0 || h <= 0 || w <= 0) throw ShapeError("metrics: crop " + std::to_string(crop) + " leaves no pixels");
  std::vector<double> out(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out[static_cast<size_t>(r) * w + c] = y.at(r + crop, c + crop, 0);
  return out;
}

void check_pair(const ImageF32& a, const ImageF32& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeError("metric inputs differ in geometry: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + "x" + std::to_string(b.channels));
  }
}

}  // namespace

double psnr_y(const ImageF32& a, const ImageF32& b, int crop) {
  check_pair(a, b);
  int h, w;
  const auto ya = cropped_y(a, crop, h, w);
  const auto yb = cropped_y(b, crop, h, w);
  double se = 0.0;
  for (size_t i = 0; i < ya.size(); ++i) se += (ya[i] - yb[i]) * (ya[i] - yb[i]);
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / static_cast<double>(ya.size())));
}

double ssim_y(const ImageF32& a, const ImageF32& b, int crop) {
  check_pair(a, b);
  int h, w;
  const auto x = cropped_y(a, crop, h, w);
  const auto y = cropped_y(b, crop, h, w);
  constexpr int kWin = 11;
  if (h < kWin || w < kWin) throw ShapeError("ssim_y needs at least 11 x 11 pixels after cropping");
  double g[kWin], gs = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    gs += g[i];
  }
  for (double& v : g) v /= gs;

  // Separable valid-mode filtering of x, y, x^2, y^2, xy.
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> rows(static_cast<size_t>(5) * h * ow);
  auto row_at = [&](int k, int r, int c) -> double& { return rows[(static_cast<size_t>(k) * h + r) * ow + c]; };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int t = 0; t < kWin; ++t) {
        const double xv = x[static_cast<size_t>(r) * w + c + t], yv = y[static_cast<size_t>(r) * w + c + t];
        s[0] += g[t] * xv;
        s[1] += g[t] * yv;
        s[2] += g[t] * xv * xv;
        s[3] += g[t] * yv * yv;
        s[4] += g[t] * xv * yv;
      }
      for (int k = 0; k < 5; ++k) row_at(k, r, c) = s[k];
    }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int t = 0; t < kWin; ++t)
        for (int k = 0; k < 5; ++k) s[k] += g[t] * row_at(k, r + t, c);
      const double mx = s[0], my = s[1];
      const double vx = s[2] - mx * mx, vy = s[3] - my * my, cxy = s[4] - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / (static_cast<double>(oh) * ow);
}

std::string format_db(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

}  // namespace hma
