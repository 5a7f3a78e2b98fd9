#include "cka_oracle.hpp"
#include "hma/analysis.hpp"
#include "test_util.hpp"

using namespace hma;

TEST(Cka, SelfSimilarityIsOne) {
  const auto x = test::random_features(40, 7, 1);
  EXPECT_NEAR(linear_cka(x, x), 1.0, 1e-9);
}

TEST(Cka, InvariantToRotationAndScale) {
  const auto x = test::random_features(30, 6, 2), y = test::random_features(30, 9, 3);
  const double base = linear_cka(x, y);
  EXPECT_NEAR(linear_cka(test::rotate(x, 4), y), base, 1e-9);
  auto scaled = x;
  for (auto& v : scaled.values) v *= 17.5;
  EXPECT_NEAR(linear_cka(scaled, y), base, 1e-9);
}

TEST(Cka, MatchesHsicFormulation) {
  for (uint64_t s = 0; s < 5; ++s) {
    const auto x = test::random_features(25, 5, 10 + s), y = test::random_features(25, 8, 20 + s);
    EXPECT_NEAR(linear_cka(x, y), test::cka_hsic(x, y), 1e-9);
  }
}

TEST(Cka, Symmetric) {
  const auto x = test::random_features(20, 4, 5), y = test::random_features(20, 6, 6);
  EXPECT_NEAR(linear_cka(x, y), linear_cka(y, x), 1e-12);
}

TEST(Cka, ConstantFeaturesGiveZero) {
  const auto x = test::random_features(10, 3, 7);
  FeatureMatrix c(10, 2, std::vector<double>(20, 4.0));
  EXPECT_EQ(linear_cka(x, c), 0.0);
}

TEST(Cka, RejectsRowMismatch) {
  EXPECT_THROW(linear_cka(test::random_features(5, 2, 1), test::random_features(6, 2, 1)), std::invalid_argument);
  EXPECT_THROW(FeatureMatrix(2, 2, std::vector<double>(3)), std::invalid_argument);
}

TEST(Capture, InteractionFeatureRows) {
  HmaModel<float> m(toy_config(2), 1);
  const auto probe = test::randn<float>({1, 3, 16, 16}, 2, 0.2);
  const std::string path = "body.0.gab.mal.grid.g";
  const auto f = capture_features(m, probe, {path, "body.1"});
  EXPECT_EQ(f.at(path).rows, 256);
  EXPECT_EQ(f.at(path).cols, 16);
  EXPECT_EQ(f.at("body.1").rows, 256);
  EXPECT_EQ(f.at("body.1").cols, 32);
}

TEST(Capture, UnknownLayerListsAvailable) {
  HmaModel<float> m(tiny_config(2), 1);
  const auto probe = Tensor<float>::zeros({1, 3, 8, 8});
  try {
    capture_features(m, probe, {"body.9"});
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("body.0.gab"), std::string::npos) << e.what();
  }
  const auto layers = available_layers(m, probe);
  EXPECT_NE(std::find(layers.begin(), layers.end(), "shallow"), layers.end());
}

TEST(Cka, GridDiagonalDominatesAcrossSeeds) {
  // Two differently seeded models: matching depths should be at least as
  // similar, on average, as mismatched ones.
  HmaModel<float> a(tiny_config(2), 1), b(tiny_config(2), 2);
  const auto probe = test::randn<float>({2, 3, 16, 16}, 3, 0.3);
  const std::vector<std::string> layers{"shallow", "body.0.fab.0", "body.0.gab", "body.0"};
  const auto fa = capture_features(a, probe, layers), fb = capture_features(b, probe, layers);
  std::vector<FeatureMatrix> ra, rb;
  for (const auto& l : layers) {
    ra.push_back(fa.at(l));
    rb.push_back(fb.at(l));
  }
  const auto self = cka_grid(layers, ra, layers, ra);
  for (size_t i = 0; i < layers.size(); ++i) EXPECT_NEAR(self.at(i, i), 1.0, 1e-6);
  const auto cross = cka_grid(layers, ra, layers, rb);
  double diag = 0, off = 0;
  for (size_t i = 0; i < layers.size(); ++i)
    for (size_t j = 0; j < layers.size(); ++j) (i == j ? diag : off) += cross.at(i, j);
  diag /= layers.size();
  off /= layers.size() * (layers.size() - 1);
  EXPECT_GE(diag, off);
}

TEST(Cka, CsvLayout) {
  CkaReport r{{"a", "b"}, {"x"}, {0.5, 1.0 / 3.0}};
  EXPECT_EQ(r.to_csv(), "layer,x\na,0.500000\nb,0.333333\n");
}
