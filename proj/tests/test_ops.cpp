#include <cmath>
#include <numbers>

#include "hma/kernels.hpp"
#include "hma/ops.hpp"
#include "hma/reference.hpp"
#include "test_util.hpp"

using namespace hma;
using test::expect_close;
using test::make;
using test::randn;

TEST(Conv2d, OnesKernelCountsNeighbours) {
  auto x = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto y = ops::conv2d<double>(x, w, std::nullopt, 1, 1);
  EXPECT_DOUBLE_EQ(y[4], 9.0);
  EXPECT_DOUBLE_EQ(y[0], 4.0);
  EXPECT_DOUBLE_EQ(y[8], 4.0);
  EXPECT_DOUBLE_EQ(y[1], 6.0);
}

TEST(Conv2d, PointwiseIdentity) {
  auto x = randn<double>({2, 3, 5, 4}, 1);
  std::vector<double> eye(9, 0.0);
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  auto y = ops::conv2d<double>(x, make<double>({3, 3, 1, 1}, eye), std::nullopt, 1, 0);
  expect_close(y, x, 0.0);
}

TEST(Conv2d, MatchesNaiveLoops) {
  for (int stride : {1, 2}) {
    kernels::ConvGeometry g{2, 3, 9, 7, 5, 3, 3, stride, 1};
    auto x = randn<double>({2, 3, 9, 7}, 2);
    auto w = randn<double>({5, 3, 3, 3}, 3);
    auto b = randn<double>({5}, 4);
    std::vector<double> ref(static_cast<size_t>(2 * 5 * g.out_h() * g.out_w()));
    reference::conv2d_forward(g, x.ptr(), w.ptr(), b.ptr(), ref.data());
    auto y = ops::conv2d<double>(x, w, b, stride, 1);
    for (size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y[static_cast<int64_t>(i)], ref[i], 1e-6);
  }
}

TEST(Conv2d, ReflectPaddingMirrorsBorder) {
  // A 1x1-centred 3x3 kernel picking the left neighbour reads the mirrored pixel at x = 0.
  auto x = make<double>({1, 1, 1, 3}, {1, 2, 3});
  std::vector<double> k(9, 0.0);
  k[3] = 1.0;
  auto zero = ops::conv2d<double>(x, make<double>({1, 1, 3, 3}, k), std::nullopt, 1, 1);
  EXPECT_DOUBLE_EQ(zero[0], 0.0);
  auto x2 = make<double>({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  auto refl = ops::conv2d<double>(x2, make<double>({1, 1, 3, 3}, k), std::nullopt, 1, 1, Padding::kReflect);
  EXPECT_DOUBLE_EQ(refl[0], 2.0);
  EXPECT_DOUBLE_EQ(refl[1], 1.0);
}

TEST(Conv2d, RejectsChannelMismatch) {
  auto x = Tensor<double>::zeros({1, 2, 4, 4});
  auto w = Tensor<double>::zeros({1, 3, 3, 3});
  EXPECT_THROW(ops::conv2d<double>(x, w, std::nullopt, 1, 1), ShapeError);
}

TEST(Gemm, ParallelMatchesReference) {
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      const int64_t m = 37, n = 29, k = 41;
      auto a = randn<double>({m * k}, 5), b = randn<double>({k * n}, 6), c0 = randn<double>({m * n}, 7);
      std::vector<double> c1 = c0.to_vector(), c2 = c0.to_vector();
      kernels::gemm(ta, tb, m, n, k, 0.5, a.ptr(), ta ? m : k, b.ptr(), tb ? k : n, 2.0, c1.data(), n);
      reference::gemm(ta, tb, m, n, k, 0.5, a.ptr(), ta ? m : k, b.ptr(), tb ? k : n, 2.0, c2.data(), n);
      for (size_t i = 0; i < c1.size(); ++i) ASSERT_NEAR(c1[i], c2[i], 1e-10);
    }
}

TEST(Linear, IdentityPlusBias) {
  auto y = ops::linear<double>(make<double>({1, 2}, {1, 2}), make<double>({2, 2}, {1, 0, 0, 1}),
                               make<double>({2}, {3, 3}));
  EXPECT_DOUBLE_EQ(y[0], 4.0);
  EXPECT_DOUBLE_EQ(y[1], 5.0);
}

TEST(Linear, RejectsWidthMismatch) {
  EXPECT_THROW(ops::linear<double>(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 2}), std::nullopt),
               ShapeError);
}

TEST(LayerNorm, TwoValues) {
  auto y = ops::layer_norm<double>(make<double>({1, 2}, {1, 3}), make<double>({2}, {1, 1}),
                                   make<double>({2}, {0, 0}), 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
  const int64_t c = 64;
  auto x = randn<double>({10, c}, 8, 5.0);
  auto y = ops::layer_norm<double>(x, Tensor<double>::full({c}, 1.0), Tensor<double>::zeros({c}));
  for (int64_t r = 0; r < 10; ++r) {
    double mean = 0, var = 0;
    for (int64_t i = 0; i < c; ++i) mean += y[r * c + i];
    mean /= c;
    for (int64_t i = 0; i < c; ++i) var += (y[r * c + i] - mean) * (y[r * c + i] - mean);
    var /= c;
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(LayerNorm, RejectsNonPositiveEps) {
  auto x = Tensor<double>::zeros({1, 2});
  EXPECT_THROW(ops::layer_norm<double>(x, Tensor<double>::full({2}, 1.0), Tensor<double>::zeros({2}), 0.0),
               std::invalid_argument);
}

TEST(Softmax, KnownValues) {
  auto y = ops::softmax_lastdim<double>(make<double>({1, 2}, {0, std::log(3.0)}));
  EXPECT_NEAR(y[0], 0.25, 1e-12);
  EXPECT_NEAR(y[1], 0.75, 1e-12);
  auto big = ops::softmax_lastdim<float>(make<float>({2}, {1000.f, 1000.f}));
  EXPECT_FLOAT_EQ(big[0], 0.5f);
  EXPECT_FLOAT_EQ(big[1], 0.5f);
}

TEST(Softmax, RowsSumToOne) {
  auto y = ops::softmax_lastdim<double>(randn<double>({7, 13}, 9, 10.0));
  for (int r = 0; r < 7; ++r) {
    double s = 0;
    for (int i = 0; i < 13; ++i) s += y[r * 13 + i];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Gelu, ExactErfForm) {
  auto y = ops::gelu<double>(make<double>({4}, {1.0, 10.0, 0.0, -1.0}));
  EXPECT_NEAR(y[0], 0.841345, 1e-6);
  EXPECT_NEAR(y[1], 10.0, 1e-6);
  EXPECT_DOUBLE_EQ(y[2], 0.0);
  EXPECT_NEAR(y[3], -0.158655, 1e-6);
}

TEST(PixelShuffle, TilesChannelsIntoBlocks) {
  std::vector<double> v(16);
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < 4; ++p) v[c * 4 + p] = 10.0 * c + p;  // channel c, pixel p
  auto y = ops::pixel_shuffle<double>(make<double>({1, 4, 2, 2}, v), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  // Each 2x2 output block reads channels A B / C D at one input pixel.
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 10.0);
  EXPECT_DOUBLE_EQ(y[4], 20.0);
  EXPECT_DOUBLE_EQ(y[5], 30.0);
  EXPECT_DOUBLE_EQ(y[2], 1.0);
  EXPECT_DOUBLE_EQ(y[15], 33.0);
}

TEST(PixelShuffle, InverseGatherRoundTrips) {
  const Shape in{2, 12, 3, 5};
  auto x = randn<double>(in, 10);
  auto idx = pixel_shuffle_index(in, 2);
  std::vector<int64_t> inv(idx->size());
  for (size_t i = 0; i < idx->size(); ++i) inv[static_cast<size_t>((*idx)[i])] = static_cast<int64_t>(i);
  auto y = ops::pixel_shuffle<double>(x, 2);
  auto back = ops::gather<double>(y, in, std::make_shared<const std::vector<int64_t>>(inv));
  expect_close(back, x, 0.0);
}

TEST(PixelShuffle, RejectsIndivisibleChannels) {
  EXPECT_THROW(ops::pixel_shuffle<double>(Tensor<double>::zeros({1, 3, 2, 2}), 2), ShapeError);
}
