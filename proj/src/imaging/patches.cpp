#include <cmath>
#include <numbers>

#include "hma/imaging.hpp"
#include "hma/rng.hpp"

namespace hma {
namespace {

ImageF32 crop(const ImageF32& img, int y0, int x0, int h, int w) {
  ImageF32 out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

}  // namespace

std::vector<PatchPair> extract_patches(const ImageF32& hr, const ImageF32& lr, int patch_lr, int count,
                                       uint64_t seed) {
  if (lr.width <= 0 || lr.height <= 0 || hr.width % lr.width != 0 || hr.height % lr.height != 0 ||
      hr.width / lr.width != hr.height / lr.height || hr.width / lr.width < 1 || hr.channels != lr.channels) {
    throw ShapeError("extract_patches: HR " + std::to_string(hr.width) + "x" + std::to_string(hr.height) +
                     " is not an integer multiple of LR " + std::to_string(lr.width) + "x" +
                     std::to_string(lr.height));
  }
  if (patch_lr < 1 || patch_lr > lr.width || patch_lr > lr.height) {
    throw ShapeError("extract_patches: patch " + std::to_string(patch_lr) + " larger than LR image " +
                     std::to_string(lr.width) + "x" + std::to_string(lr.height));
  }
  const int s = hr.width / lr.width;
  Rng rng(seed);
  std::vector<PatchPair> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int y = static_cast<int>(rng.below(static_cast<uint64_t>(lr.height - patch_lr + 1)));
    const int x = static_cast<int>(rng.below(static_cast<uint64_t>(lr.width - patch_lr + 1)));
    out.push_back({crop(lr, y, x, patch_lr, patch_lr), crop(hr, y * s, x * s, patch_lr * s, patch_lr * s)});
  }
  return out;
}

ImageF32 augment(const ImageF32& img, bool flip, int rot90) {
  if (rot90 < 0 || rot90 > 3) throw std::invalid_argument("augment: rot90 must be in 0..3");
  ImageF32 cur = img;
  if (flip) {
    for (int y = 0; y < cur.height; ++y)
      for (int x = 0; x < cur.width; ++x)
        for (int c = 0; c < cur.channels; ++c) cur.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  }
  for (int r = 0; r < rot90; ++r) {
    ImageF32 next(cur.height, cur.width, cur.channels);
    for (int y = 0; y < next.height; ++y)
      for (int x = 0; x < next.width; ++x)
        for (int c = 0; c < cur.channels; ++c) next.at(y, x, c) = cur.at(x, cur.width - 1 - y, c);
    cur = std::move(next);
  }
  return cur;
}

PatchPair augment(const PatchPair& pair, bool flip, int rot90) {
  return {augment(pair.lr, flip, rot90), augment(pair.hr, flip, rot90)};
}

ImageF32 synthetic_texture(int width, int height, uint64_t seed) {
  Rng rng(seed);
  ImageF32 out(width, height, 3);
  for (int c = 0; c < 3; ++c) {
    double fx[4], fy[4], ph[4], amp[4];
    for (int k = 0; k < 4; ++k) {
      fx[k] = static_cast<double>(rng.below(4)) + 1.0;
      fy[k] = static_cast<double>(rng.below(4));
      ph[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      amp[k] = rng.uniform(0.03, 0.1);
    }
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double v = 0.5;
        for (int k = 0; k < 4; ++k) {
          v += amp[k] * std::sin(2.0 * std::numbers::pi * (fx[k] * x / width + fy[k] * y / height) + ph[k]);
        }
        out.at(y, x, c) = static_cast<float>(v);
      }
  }
  return out;
}

}  // namespace hma
