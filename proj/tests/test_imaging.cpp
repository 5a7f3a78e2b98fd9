#include <filesystem>
#include <fstream>

#include "hma/imaging.hpp"
#include "imaging_oracle.hpp"
#include "test_util.hpp"

using namespace hma;
namespace fs = std::filesystem;

namespace {

ImageF32 solid(int w, int h, float r, float g, float b) {
  ImageF32 img(w, h, 3);
  for (int p = 0; p < w * h; ++p) {
    img.data[3 * p] = r;
    img.data[3 * p + 1] = g;
    img.data[3 * p + 2] = b;
  }
  return img;
}

std::string temp_path(const std::string& name) { return (fs::path(testing::TempDir()) / name).string(); }

void expect_images_near(const ImageF32& a, const ImageF32& b, double tol) {
  ASSERT_EQ(a.width, b.width);
  ASSERT_EQ(a.height, b.height);
  for (size_t i = 0; i < a.data.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], tol) << "at " << i;
}

}  // namespace

TEST(Color, StudioSwingLuma) {
  EXPECT_NEAR(rgb_to_y(solid(1, 1, 0, 0, 0)).data[0], 16.0 / 255.0, 1e-6);
  EXPECT_NEAR(rgb_to_y(solid(1, 1, 1, 1, 1)).data[0], 235.0 / 255.0, 1e-6);
  EXPECT_NEAR(rgb_to_y(solid(1, 1, 0, 1, 0)).data[0], 0.56688, 1e-5);
}

TEST(Bicubic, HalfPhaseWeights) {
  EXPECT_EQ(cubic_kernel(0.5), 0.5625);
  EXPECT_EQ(cubic_kernel(1.5), -0.0625);
  // Without antialiasing a 2x reduction samples exactly half-way between inputs.
  const auto taps = resample_taps(16, 8, false);
  EXPECT_EQ(taps[2].weight, (std::vector<double>{-0.0625, 0.5625, 0.5625, -0.0625}));
  EXPECT_EQ(taps[2].index, (std::vector<int>{3, 4, 5, 6}));
}

TEST(Bicubic, ConstantStaysConstant) {
  const auto img = solid(9, 7, 0.3f, 0.6f, 0.9f);
  for (auto [h, w] : {std::pair{14, 18}, std::pair{3, 4}, std::pair{7, 9}}) {
    const auto out = bicubic_resize(img, h, w, true);
    for (int p = 0; p < h * w; ++p) {
      EXPECT_NEAR(out.data[3 * p], 0.3f, 1e-6);
      EXPECT_NEAR(out.data[3 * p + 2], 0.9f, 1e-6);
    }
  }
}

TEST(Bicubic, SameSizeIsIdentity) {
  const auto img = test::random_image(10, 6, 1);
  expect_images_near(bicubic_resize(img, 6, 10, false), img, 1e-6);
}

TEST(Bicubic, RampUpscaleMatchesKernelSum) {
  ImageF32 ramp(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(y, x, 0) = static_cast<float>((x + 2 * y) / 24.0);
  expect_images_near(bicubic_resize(ramp, 16, 16, false), test::brute_bicubic(ramp, 16, 16, false), 1e-6);
}

TEST(Bicubic, DownscaleMatchesKernelSum) {
  const auto img = test::random_image(17, 13, 2);
  expect_images_near(bicubic_resize(img, 5, 7, true), test::brute_bicubic(img, 5, 7, true), 1e-6);
  expect_images_near(bicubic_resize(img, 5, 7, false), test::brute_bicubic(img, 5, 7, false), 1e-6);
}

TEST(Bicubic, DegradeRoundsUp) {
  const auto img = test::random_image(33, 30, 3);
  const auto lr = bicubic_degrade(img, 2);
  EXPECT_EQ(lr.width, 17);
  EXPECT_EQ(lr.height, 15);
  expect_images_near(lr, test::brute_bicubic(img, 15, 17, true, 0.5, 0.5), 1e-6);
}

TEST(Metrics, PsnrOfOneLevelOffset) {
  auto a = solid(16, 16, 0.5f, 0.5f, 0.5f);
  auto b = a;
  // Raising all channels by d raises Y by d * 219 / 255.
  const float d = static_cast<float>(255.0 / 219.0 / 255.0);
  for (auto& v : b.data) v += d;
  EXPECT_NEAR(psnr_y(a, b, 0), 48.1308, 1e-3);
  EXPECT_DOUBLE_EQ(psnr_y(a, b, 2), psnr_y(b, a, 2));
  EXPECT_TRUE(std::isinf(psnr_y(a, a, 0)));
  EXPECT_EQ(format_db(psnr_y(a, a, 0)), "inf");
}

TEST(Metrics, SsimClosedFormForConstants) {
  const auto a = solid(20, 20, 0.2f, 0.2f, 0.2f), b = solid(20, 20, 0.7f, 0.7f, 0.7f);
  // Y is stored in float, so the closed form uses the stored luma.
  const double ya = rgb_to_y(a).data[0], yb = rgb_to_y(b).data[0], c1 = 1e-4;
  EXPECT_NEAR(ssim_y(a, b, 0), (2 * ya * yb + c1) / (ya * ya + yb * yb + c1), 1e-9);
  EXPECT_NEAR(ssim_y(a, a, 0), 1.0, 1e-12);
}

TEST(Metrics, MatchNaiveOracles) {
  const auto a = test::random_image(24, 20, 4), b = test::random_image(24, 20, 5);
  EXPECT_NEAR(psnr_y(a, b, 3), test::naive_psnr(a, b, 3), 1e-6);
  EXPECT_NEAR(ssim_y(a, b, 2), test::naive_ssim(a, b, 2), 1e-6);
}

TEST(Metrics, RejectMismatchedGeometry) {
  EXPECT_THROW(psnr_y(solid(4, 4, 0, 0, 0), solid(4, 5, 0, 0, 0), 0), ShapeError);
  EXPECT_THROW(ssim_y(solid(8, 8, 0, 0, 0), solid(8, 8, 0, 0, 0), 0), ShapeError);
}

TEST(Patches, AlignedCrops) {
  const auto hr = test::random_image(256, 256, 6);
  const auto lr = bicubic_degrade(hr, 4);
  const auto pairs = extract_patches(hr, lr, 64, 3, 7);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].hr.width, 256);
  EXPECT_EQ(pairs[0].lr.width, 64);
}

TEST(Patches, DrawsStayInBounds) {
  const auto hr = test::random_image(130, 130, 8), lr = test::random_image(65, 65, 9);
  ImageF32 marked = lr;
  for (int y = 0; y < 65; ++y)
    for (int x = 0; x < 65; ++x) marked.at(y, x, 0) = static_cast<float>(y * 65 + x);
  const auto pairs = extract_patches(hr, marked, 16, 10000, 10);
  for (const auto& p : pairs) {
    const int origin = static_cast<int>(p.lr.at(0, 0, 0));
    ASSERT_LE(origin / 65 + 16, 65);
    ASSERT_LE(origin % 65 + 16, 65);
  }
  EXPECT_THROW(extract_patches(hr, lr, 66, 1, 0), ShapeError);
}

TEST(Augment, GroupIdentities) {
  const auto img = test::random_image(5, 3, 11);
  expect_images_near(augment(augment(img, true, 0), true, 0), img, 0.0);
  auto r = img;
  for (int i = 0; i < 4; ++i) r = augment(r, false, 1);
  expect_images_near(r, img, 0.0);
  const auto q = augment(img, false, 1);
  EXPECT_EQ(q.width, 3);
  EXPECT_EQ(q.height, 5);
  // Counter-clockwise: the top-right input pixel becomes the top-left output pixel.
  EXPECT_EQ(q.at(0, 0, 1), img.at(0, 4, 1));
}

TEST(Augment, CommutesWithLuma) {
  const auto img = test::random_image(6, 4, 12);
  expect_images_near(rgb_to_y(augment(img, true, 3)), augment(rgb_to_y(img), true, 3), 0.0);
}

TEST(ImageIo, PngAndPpmRoundTrip) {
  ImageU8 img{7, 5, 3, {}};
  for (int i = 0; i < 7 * 5 * 3; ++i) img.data.push_back(static_cast<uint8_t>(i * 7));
  for (const std::string ext : {".png", ".ppm"}) {
    const auto path = temp_path("roundtrip" + ext);
    save_image(img, path);
    EXPECT_EQ(load_image(path), img);
    EXPECT_FALSE(fs::exists(path + ".tmp"));
  }
  ImageU8 gray{4, 3, 1, std::vector<uint8_t>(12, 200)};
  save_image(gray, temp_path("gray.png"));
  EXPECT_EQ(load_image(temp_path("gray.png")), gray);
}

TEST(ImageIo, ReportsTruncation) {
  const auto path = temp_path("short.ppm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n4 4\n255\n" << std::string(10, 'x');
  }
  try {
    load_image(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
  }
  const auto bad = temp_path("bad.png");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "\x89PNG\r\n\x1a\n" << std::string(5, '\0');
  }
  EXPECT_THROW(load_image(bad), FormatError);
  EXPECT_THROW(load_image(temp_path("missing.png")), std::runtime_error);
}

TEST(ImageIo, QuantizationRoundTrip) {
  ImageU8 img{3, 2, 3, {}};
  for (int i = 0; i < 18; ++i) img.data.push_back(static_cast<uint8_t>(i * 14));
  EXPECT_EQ(to_u8(to_float(img)), img);
}
