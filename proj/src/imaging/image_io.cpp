#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "hma/imaging.hpp"

namespace hma {
namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

[[noreturn]] void fail(const std::string& path, size_t offset, const std::string& what) {
  throw FormatError(path + ": " + what + " at byte offset " + std::to_string(offset));
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

const uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

ImageU8 load_png(const std::string& path, const std::vector<uint8_t>& bytes) {
  for (size_t i = 0; i < 8; ++i) {
    if (i >= bytes.size() || bytes[i] != kPngSig[i]) fail(path, i, "bad PNG signature");
  }
  if (bytes.size() < 33) fail(path, bytes.size(), "truncated IHDR chunk");
  if (be32(&bytes[8]) != 13) fail(path, 8, "IHDR length is not 13");
  if (std::memcmp(&bytes[12], "IHDR", 4) != 0) fail(path, 12, "first chunk is not IHDR");
  if (be32(&bytes[16]) == 0) fail(path, 16, "zero image width");
  if (be32(&bytes[20]) == 0) fail(path, 20, "zero image height");
  const int depth = bytes[24], color = bytes[25];
  const bool depth_ok = (color == 3 && (depth == 1 || depth == 2 || depth == 4 || depth == 8)) ||
                        (color == 0 && (depth == 1 || depth == 2 || depth == 4 || depth == 8)) ||
                        ((color == 2 || color == 4 || color == 6) && depth == 8);
  if (color != 0 && color != 2 && color != 3 && color != 4 && color != 6) fail(path, 25, "invalid colour type");
  if (!depth_ok) fail(path, 24, "unsupported bit depth " + std::to_string(depth));
  if (bytes[26] != 0) fail(path, 26, "unknown compression method");
  if (bytes[27] != 0) fail(path, 27, "unknown filter method");
  if (bytes[28] > 1) fail(path, 28, "unknown interlace method");

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(path + ": " + image.message);
  }
  const bool color_out = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color_out ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageU8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color_out ? 3 : 1;
  out.data.assign(PNG_IMAGE_SIZE(image), 0);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(path + ": " + msg + " (image data starts after byte offset 33)");
  }
  return out;
}

ImageU8 load_pnm(const std::string& path, const std::vector<uint8_t>& bytes) {
  size_t pos = 2;
  auto next_int = [&](const char* field) {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && v < 1'000'000) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) fail(path, start, std::string("expected ") + field);
    return std::pair<long, size_t>{v, start};
  };
  const int channels = bytes[1] == '6' ? 3 : 1;
  auto [w, w_at] = next_int("width");
  auto [h, h_at] = next_int("height");
  auto [maxval, m_at] = next_int("maxval");
  if (w <= 0 || w >= 1'000'000) fail(path, w_at, "invalid width");
  if (h <= 0 || h >= 1'000'000) fail(path, h_at, "invalid height");
  if (maxval != 255) fail(path, m_at, "only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(path, pos, "missing whitespace after header");
  ++pos;
  const size_t need = static_cast<size_t>(w) * h * channels;
  if (bytes.size() - pos < need) fail(path, bytes.size(), "truncated pixel data");
  ImageU8 out{static_cast<int>(w), static_cast<int>(h), channels, {}};
  out.data.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  for (auto& ch : tail) ch = static_cast<char>(std::tolower(ch));
  return tail == suffix;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return load_pnm(path, bytes);
  return load_png(path, bytes);
}

void save_image(const ImageU8& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3) ||
      img.data.size() != static_cast<size_t>(img.width) * img.height * img.channels) {
    throw ShapeError("save_image: inconsistent image geometry");
  }
  std::vector<uint8_t> bytes;
  if (ends_with(path, ".ppm") || ends_with(path, ".pgm")) {
    const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) +
                               " " + std::to_string(img.height) + "\n255\n";
    bytes.assign(header.begin(), header.end());
    bytes.insert(bytes.end(), img.data.begin(), img.data.end());
  } else {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, img.data.data(), 0, nullptr)) {
      throw FormatError(path + ": " + image.message);
    }
    bytes.resize(size);
    if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, img.data.data(), 0, nullptr)) {
      throw FormatError(path + ": " + image.message);
    }
    bytes.resize(size);
  }
  write_file_atomic(path, bytes);
}

ImageF32 to_float(const ImageU8& img) {
  ImageF32 out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
  return out;
}

ImageU8 to_u8(const ImageF32& img) {
  ImageU8 out{img.width, img.height, img.channels, std::vector<uint8_t>(img.data.size())};
  for (size_t i = 0; i < img.data.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

Tensor<float> to_tensor(const ImageF32& img) {
  const int64_t hw = static_cast<int64_t>(img.width) * img.height;
  std::vector<float> v(img.data.size());
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < img.channels; ++c) v[static_cast<size_t>(c * hw + p)] = img.data[static_cast<size_t>(p * img.channels + c)];
  return Tensor<float>({1, img.channels, img.height, img.width}, std::move(v));
}

ImageF32 from_tensor(const Tensor<float>& t) {
  if (t.rank() != 4 || t.dim(0) != 1) throw ShapeError("from_tensor expects 1 x C x H x W, got " + to_string(t.shape()));
  ImageF32 out(static_cast<int>(t.dim(3)), static_cast<int>(t.dim(2)), static_cast<int>(t.dim(1)));
  const int64_t hw = t.dim(2) * t.dim(3);
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < out.channels; ++c) out.data[static_cast<size_t>(p * out.channels + c)] = t[c * hw + p];
  return out;
}

void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace hma
