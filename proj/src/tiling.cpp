#include "hma/tiling.hpp"

namespace hma {
namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Tile origins along one axis and the padded extent they cover.
std::vector<int> origins(int size, int tile, int stride, int& padded) {
  std::vector<int> out{0};
  while (out.back() + tile < size) out.push_back(out.back() + stride);
  padded = out.back() + tile;
  return out;
}

}  // namespace

ImageF32 tiled_inference(const ImageF32& img, HmaModel<float>& model, int tile, int overlap) {
  const HmaConfig& cfg = model.config();
  if (tile < cfg.pad_multiple() || tile % cfg.pad_multiple() != 0) {
    throw ShapeError("tile " + std::to_string(tile) + " must be a positive multiple of " +
                     std::to_string(cfg.pad_multiple()));
  }
  if (tile > cfg.img_size) {
    throw ShapeError("tile " + std::to_string(tile) + " exceeds the model's img_size " + std::to_string(cfg.img_size));
  }
  if (overlap < 0 || overlap >= tile) throw ShapeError("overlap must be in [0, tile)");
  if (img.channels != cfg.in_channels) throw ShapeError("image channel count does not match the model");

  const int s = cfg.scale, c = img.channels;
  int ph = 0, pw = 0;
  const auto ys = origins(img.height, tile, tile - overlap, ph);
  const auto xs = origins(img.width, tile, tile - overlap, pw);

  std::vector<double> sum(static_cast<size_t>(ph) * s * pw * s * c, 0.0);
  std::vector<int> hits(static_cast<size_t>(ph) * s * pw * s, 0);
  const int ow = pw * s;
  for (int y0 : ys)
    for (int x0 : xs) {
      ImageF32 patch(tile, tile, c);
      for (int y = 0; y < tile; ++y)
        for (int x = 0; x < tile; ++x)
          for (int ch = 0; ch < c; ++ch)
            patch.at(y, x, ch) = img.at(reflect(y0 + y, img.height), reflect(x0 + x, img.width), ch);
      const ImageF32 up = from_tensor(model.infer(to_tensor(patch)));
      for (int y = 0; y < up.height; ++y)
        for (int x = 0; x < up.width; ++x) {
          const size_t p = static_cast<size_t>(y0 * s + y) * ow + x0 * s + x;
          ++hits[p];
          for (int ch = 0; ch < c; ++ch) sum[p * c + ch] += up.at(y, x, ch);
        }
    }
  ImageF32 out(img.width * s, img.height * s, c);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const size_t p = static_cast<size_t>(y) * ow + x;
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = static_cast<float>(sum[p * c + ch] / hits[p]);
    }
  return out;
}

}  // namespace hma
