#include <algorithm>
#include <filesystem>

#include "hma/rng.hpp"
#include "hma/training.hpp"

namespace hma {
namespace {

ImageF32 as_rgb(const ImageF32& img) {
  if (img.channels == 3) return img;
  ImageF32 out(img.width, img.height, 3);
  for (size_t p = 0; p < img.data.size(); ++p)
    for (int c = 0; c < 3; ++c) out.data[3 * p + c] = img.data[p];
  return out;
}

ImageF32 crop_to_multiple(const ImageF32& img, int s) {
  const int w = img.width / s * s, h = img.height / s * s;
  if (w == img.width && h == img.height) return img;
  ImageF32 out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, x, c);
  return out;
}

void add_pair(Dataset& d, std::string name, const ImageF32& hr_full) {
  ImageF32 hr = crop_to_multiple(as_rgb(hr_full), d.scale);
  if (hr.width < d.scale || hr.height < d.scale) throw FormatError(name + ": image smaller than the scale factor");
  d.lr.push_back(bicubic_degrade(hr, d.scale));
  d.hr.push_back(std::move(hr));
  d.names.push_back(std::move(name));
}

}  // namespace

Dataset load_dataset(const std::string& dir, int scale) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FormatError("data directory " + dir + " is not readable");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("no PNG or PPM images in " + dir);
  Dataset d;
  d.scale = scale;
  for (const auto& f : files) add_pair(d, f.filename().string(), to_float(load_image(f.string())));
  return d;
}

Dataset synthetic_dataset(int count, int hr_size, int scale, uint64_t seed) {
  Dataset d;
  d.scale = scale;
  for (int i = 0; i < count; ++i) {
    add_pair(d, "synthetic_" + std::to_string(i), synthetic_texture(hr_size, hr_size, seed + static_cast<uint64_t>(i)));
  }
  return d;
}

Batch sample_batch(const Dataset& data, const TrainConfig& cfg, int64_t iter) {
  if (data.hr.empty()) throw FormatError("empty dataset");
  Rng rng(cfg.seed ^ (0x9E3779B97F4A7C15ull * static_cast<uint64_t>(iter + 1)));
  const int p = cfg.patch_lr, s = data.scale, hp = p * s;
  std::vector<float> lr(static_cast<size_t>(cfg.batch) * 3 * p * p), hr(static_cast<size_t>(cfg.batch) * 3 * hp * hp);
  for (int b = 0; b < cfg.batch; ++b) {
    const size_t idx = static_cast<size_t>(rng.below(data.hr.size()));
    const ImageF32& src_lr = data.lr[idx];
    if (src_lr.width < p || src_lr.height < p) {
      throw FormatError(data.names[idx] + ": smaller than the " + std::to_string(p) + " pixel training patch");
    }
    const int y = static_cast<int>(rng.below(static_cast<uint64_t>(src_lr.height - p + 1)));
    const int x = static_cast<int>(rng.below(static_cast<uint64_t>(src_lr.width - p + 1)));
    const bool flip = cfg.augment && rng.below(2) == 1;
    const int rot = cfg.augment ? static_cast<int>(rng.below(4)) : 0;
    PatchPair pair;
    pair.lr = ImageF32(p, p, 3);
    pair.hr = ImageF32(hp, hp, 3);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c)
        for (int ch = 0; ch < 3; ++ch) pair.lr.at(r, c, ch) = src_lr.at(y + r, x + c, ch);
    for (int r = 0; r < hp; ++r)
      for (int c = 0; c < hp; ++c)
        for (int ch = 0; ch < 3; ++ch) pair.hr.at(r, c, ch) = data.hr[idx].at(y * s + r, x * s + c, ch);
    pair = augment(pair, flip, rot);
    const auto tl = to_tensor(pair.lr), th = to_tensor(pair.hr);
    std::copy(tl.data().begin(), tl.data().end(), lr.begin() + static_cast<std::ptrdiff_t>(b) * 3 * p * p);
    std::copy(th.data().begin(), th.data().end(), hr.begin() + static_cast<std::ptrdiff_t>(b) * 3 * hp * hp);
  }
  return {Tensor<float>({cfg.batch, 3, p, p}, std::move(lr)), Tensor<float>({cfg.batch, 3, hp, hp}, std::move(hr))};
}

}  // namespace hma
