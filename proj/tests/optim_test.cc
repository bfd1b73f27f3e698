#include "lesionattr/optim.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "lesionattr/params.h"
#include "lesionattr/random.h"
#include "lesionattr/tensor.h"
#include "test_util.h"

namespace lesionattr {
namespace {

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
  const Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(Tensor::row({1.0, 2.0}).shape(), (Shape{1, 2}));
}

TEST(Tensor, AddInplaceChecksShape) {
  Tensor a({2}, 1.0);
  a.add_inplace(Tensor({2}, 2.0));
  EXPECT_EQ(a[0], 3.0);
  EXPECT_THROW(a.add_inplace(Tensor({3}, 1.0)), std::invalid_argument);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5), c(6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitStreamsAreIndependentOfParentPosition) {
  Rng a(9);
  const Rng before = a.split(3);
  a.next_u64();
  Rng s1 = before, s2 = a.split(3);
  EXPECT_EQ(s1.next_u64(), s2.next_u64());
  EXPECT_NE(a.split(3).next_u64(), a.split(4).next_u64());
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Xavier, SampleStdMatchesFans) {
  Rng rng(4);
  const Tensor w = xavier_normal_init({100, 100}, rng);
  double s = 0.0, s2 = 0.0;
  for (double v : w.values()) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  EXPECT_NEAR(sd, std::sqrt(1.0 / 100.0), 0.1 * std::sqrt(1.0 / 100.0));
}

TEST(Xavier, ConvolutionFansIncludeWindow) {
  Rng rng(5);
  const Tensor w = xavier_normal_init({3, 40, 60}, rng);
  double s2 = 0.0;
  for (double v : w.values()) s2 += v * v;
  const double expected = std::sqrt(2.0 / (3.0 * 40.0 + 3.0 * 60.0));
  EXPECT_NEAR(std::sqrt(s2 / static_cast<double>(w.size())), expected, 0.1 * expected);
}

TEST(Xavier, FixedSeedReproduces) {
  Rng a(6), b(6);
  EXPECT_EQ(xavier_normal_init({7, 3}, a), xavier_normal_init({7, 3}, b));
  EXPECT_THROW(xavier_normal_init({7}, a), std::invalid_argument);
}

TEST(BiasInit, AllEntriesAreOneHundredth) {
  const Tensor b = bias_init(64);
  ASSERT_EQ(b.size(), 64u);
  for (double v : b.values()) EXPECT_EQ(v, 0.01);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params = {Tensor({3}, std::vector<double>{1.0, 1.0, 1.0})};
  const std::vector<Tensor> grads = {Tensor({3}, std::vector<double>{5.0, -0.2, 300.0})};
  AdamState state;
  adam_step(params, grads, state, 0.01);
  EXPECT_NEAR(params[0][0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(params[0][1], 1.0 + 0.01, 1e-7);
  EXPECT_NEAR(params[0][2], 1.0 - 0.01, 1e-9);
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<Tensor> params = {Tensor({2, 2}, 0.7)};
  const std::vector<Tensor> grads = {Tensor({2, 2}, 0.0)};
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, grads, state, 0.1);
  EXPECT_EQ(params[0], Tensor({2, 2}, 0.7));
}

TEST(Adam, MinimizesScalarQuadratic) {
  std::vector<Tensor> x = {Tensor({1}, 5.0)};
  AdamState state;
  for (int i = 0; i < 100; ++i) {
    const std::vector<Tensor> g = {Tensor({1}, 2.0 * x[0][0])};
    adam_step(x, g, state, 0.1);
  }
  EXPECT_LT(std::abs(x[0][0]), 0.5);
}

TEST(Adam, MatchesReferenceRecurrence) {
  std::vector<Tensor> x = {Tensor({1}, 1.0)};
  AdamState state;
  double p = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 20; ++t) {
    const double g = std::sin(t) * 3.0;
    adam_step(x, std::vector<Tensor>{Tensor({1}, g)}, state, 0.05);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    p -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(x[0][0], p, 1e-12);
  }
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<Tensor> x = {Tensor({2}, 0.0)};
  AdamState state;
  EXPECT_THROW(adam_step(x, std::vector<Tensor>{Tensor({3}, 0.0)}, state, 0.1),
               std::invalid_argument);
}

TEST(ParamStore, RejectsDuplicateNames) {
  ParamStore p;
  p.add("w", Tensor({2}));
  EXPECT_THROW(p.add("w", Tensor({2})), std::invalid_argument);
  EXPECT_EQ(p.find("w"), 0u);
  EXPECT_FALSE(p.find("b").has_value());
}

TEST(ParamStore, SaveLoadRoundTripIsExact) {
  Rng rng(7);
  ParamStore p;
  p.add("a", testing::random_tensor({3, 4}, rng));
  p.add("b.c", testing::random_tensor({2, 2, 5}, rng, 1e-7));
  const auto path = std::filesystem::temp_directory_path() / "lesionattr_params_test.json";
  save_params(p, path);
  EXPECT_EQ(load_params(path), p);
  std::filesystem::remove(path);
}

TEST(ParamStore, LoadRejectsWrongFormat) {
  const auto path = std::filesystem::temp_directory_path() / "lesionattr_params_bad.json";
  {
    std::ofstream out(path);
    out << R"({"format": "something", "version": 1, "tensors": []})";
  }
  EXPECT_THROW(load_params(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << R"({"format": "lesionattr.params", "version": 1,
              "tensors": [{"name": "x", "shape": [2], "data": [1.0]}]})";
  }
  EXPECT_THROW(load_params(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(ParamStore, AssignChecksNamesAndShapes) {
  ParamStore target, good, bad_shape, missing;
  target.add("w", Tensor({2}, 0.0));
  good.add("w", Tensor({2}, 3.0));
  bad_shape.add("w", Tensor({3}, 3.0));
  missing.add("v", Tensor({2}, 3.0));
  assign_params(target, good);
  EXPECT_EQ(target.value(0)[1], 3.0);
  EXPECT_THROW(assign_params(target, bad_shape), std::runtime_error);
  EXPECT_THROW(assign_params(target, missing), std::runtime_error);
}

}  // namespace
}  // namespace lesionattr
