#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hma/tensor.hpp"

namespace hma {

/// 8-bit samples, row-major, channels interleaved.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<uint8_t> data;

  bool operator==(const ImageU8&) const = default;
};

/// Same layout as ImageU8 with samples in [0, 1].
struct ImageF32 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  ImageF32() = default;
  ImageF32(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}
  float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

ImageF32 to_float(const ImageU8& img);
/// Clamps to [0, 1] and rounds to the nearest level.
ImageU8 to_u8(const ImageF32& img);
/// 1 x C x H x W.
Tensor<float> to_tensor(const ImageF32& img);
ImageF32 from_tensor(const Tensor<float>& t);

/// PNG (8-bit, grayscale or RGB; alpha is composited over black) or binary
/// PPM/PGM, chosen by file signature. Throws FormatError with the byte
/// offset of the problem.
ImageU8 load_image(const std::string& path);
/// Format chosen by extension (.png, .ppm / .pgm). Writes via a temporary
/// file renamed into place.
void save_image(const ImageU8& img, const std::string& path);
/// Writes `path + ".tmp"` and renames it over `path`.
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);

/// BT.601 studio-swing luma: (16 + 65.481 R + 128.553 G + 24.966 B) / 255.
ImageF32 rgb_to_y(const ImageF32& img);

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double t);

/// One output sample's contributing input indices (edge-clamped) and
/// normalized weights.
struct ResampleTap {
  std::vector<int> index;
  std::vector<double> weight;
};
/// `scale` is out/in unless given explicitly (as a degrade factor's 1/s is).
std::vector<ResampleTap> resample_taps(int in_size, int out_size, bool antialias, double scale = 0.0);

ImageF32 bicubic_resize(const ImageF32& img, int out_h, int out_w, bool antialias = true);
/// Downscale by `scale` with output size ceil(in / scale).
ImageF32 bicubic_degrade(const ImageF32& img, int scale);

/// Both metrics convert to Y when given RGB and drop `crop` pixels per border.
/// psnr_y returns +infinity for identical inputs.
double psnr_y(const ImageF32& a, const ImageF32& b, int crop);
double ssim_y(const ImageF32& a, const ImageF32& b, int crop);
/// "inf" for infinite values, fixed 4-decimal text otherwise.
std::string format_db(double db);

struct PatchPair {
  ImageF32 lr;
  ImageF32 hr;
};

/// `count` aligned random crops; hr must be exactly scale x lr.
std::vector<PatchPair> extract_patches(const ImageF32& hr, const ImageF32& lr, int patch_lr, int count,
                                       uint64_t seed);
/// Optional horizontal flip followed by rot90 quarter turns counter-clockwise.
ImageF32 augment(const ImageF32& img, bool flip, int rot90);
PatchPair augment(const PatchPair& pair, bool flip, int rot90);

/// Smooth periodic colour texture for desk-scale data sets.
ImageF32 synthetic_texture(int width, int height, uint64_t seed);

}  // namespace hma
