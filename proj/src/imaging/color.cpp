#include "hma/imaging.hpp"

namespace hma {

ImageF32 rgb_to_y(const ImageF32& img) {
  if (img.channels != 3) throw ShapeError("rgb_to_y expects 3 channels, got " + std::to_string(img.channels));
  ImageF32 out(img.width, img.height, 1);
  for (size_t p = 0; p < out.data.size(); ++p) {
    const double r = img.data[3 * p], g = img.data[3 * p + 1], b = img.data[3 * p + 2];
    out.data[p] = static_cast<float>((16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0);
  }
  return out;
}

}  // namespace hma
