#include "hma/ag_ops.hpp"
#include "hma/grad_check.hpp"
#include "test_util.hpp"

using namespace hma;
using test::make;
using test::randn;

TEST(Backward, SumGivesOnes) {
  Tape<double> tape;
  auto x = tape.input(randn<double>({3, 4}, 1));
  tape.backward(ag::sum(x));
  auto g = tape.grad(x);
  ASSERT_TRUE(g.has_value());
  for (int64_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ((*g)[i], 1.0);
}

TEST(Backward, HalfSquaredNorm) {
  Tape<double> tape;
  auto x = tape.input(make<double>({2}, {1.0, -2.0}));
  tape.backward(ag::scale(ag::sum(ag::mul(x, x)), 0.5));
  auto g = *tape.grad(x);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], -2.0);
}

TEST(Backward, FanOutAccumulates) {
  Tape<double> tape;
  auto x = tape.input(make<double>({1}, {3.0}));
  auto y = ag::add(ag::add(x, x), ag::mul(x, x));  // 2x + x^2
  tape.backward(ag::sum(y));
  EXPECT_DOUBLE_EQ((*tape.grad(x))[0], 8.0);
}

TEST(Backward, ParametersReceiveGradients) {
  ParamStore<double> store;
  store.add("w", make<double>({2, 1}, {2.0, 3.0}));
  Tape<double> tape;
  auto w = tape.param(store, "w");
  auto x = tape.constant(make<double>({1, 2}, {5.0, 7.0}));
  tape.backward(ag::sum(ag::linear(x, w, std::optional<Var<double>>())));
  const auto& g = *store.at("w").grad;
  EXPECT_DOUBLE_EQ(g[0], 5.0);
  EXPECT_DOUBLE_EQ(g[1], 7.0);
}

TEST(Backward, NoGradTapeRecordsNothing) {
  Tape<double> tape(false);
  auto x = tape.input(make<double>({1}, {1.0}));
  auto y = ag::mul(x, x);
  EXPECT_FALSE(tape.requires_grad(y));
}

TEST(GradCheck, LinearFunctionIsExact) {
  auto r = grad_check([](Tape<double>&, const Var<double>& x) { return ag::sum(x); }, randn<double>({5}, 2));
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.checked, 5);
}

TEST(GradCheck, Quadratic) {
  auto r = grad_check([](Tape<double>&, const Var<double>& x) { return ag::scale(ag::sum(ag::mul(x, x)), 0.5); },
                      randn<double>({6}, 3), 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, SoftmaxSquares) {
  auto r = grad_check(
      [](Tape<double>&, const Var<double>& x) {
        auto s = ag::softmax_lastdim(x);
        return ag::sum(ag::mul(s, s));
      },
      randn<double>({8}, 4));
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsWrongAdjoint) {
  // An op whose recorded adjoint is off by a factor of two must be flagged.
  auto r = grad_check(
      [](Tape<double>& tape, const Var<double>& x) {
        auto y = tape.record(x.value(), {x}, [](BackwardContext<double>& ctx) {
          auto go = ctx.grad_output();
          auto gi = ctx.grad_input(0);
          for (size_t i = 0; i < go.size(); ++i) gi[i] += 2.0 * go[i];
        });
        return ag::sum(y);
      },
      randn<double>({3}, 5));
  EXPECT_GT(r.max_rel_error, 0.5);
}

TEST(GradCheck, RejectsNonScalarOutput) {
  EXPECT_THROW(grad_check([](Tape<double>&, const Var<double>& x) { return x; }, randn<double>({3}, 6)),
               ShapeError);
}
