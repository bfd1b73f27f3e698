#include "lesionattr/model.h"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.h"

namespace lesionattr {
namespace {

using ad::Var;
using testing::random_tensor;
using Matrix = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// Plain-loop reference implementation of the forward pass.

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

double elu(double v) { return v > 0.0 ? v : std::exp(v) - 1.0; }

// filters: window x in x out, centred window, zero padding.
Matrix conv_same(const Matrix& x, const Tensor& f, const Tensor* bias) {
  const std::size_t w = f.shape()[0], cin = f.shape()[1], cout = f.shape()[2];
  const long half = static_cast<long>(w / 2);
  Matrix y(x.size(), std::vector<double>(cout, 0.0));
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = bias ? (*bias)[o] : 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        const long src = static_cast<long>(t) + static_cast<long>(k) - half;
        if (src < 0 || src >= static_cast<long>(x.size())) continue;
        for (std::size_t c = 0; c < cin; ++c)
          acc += x[static_cast<std::size_t>(src)][c] * f[(k * cin + c) * cout + o];
      }
      y[t][o] = acc;
    }
  }
  return y;
}

Matrix reference_head(const Matrix& slice, const Tensor& f, const Tensor& wq, const Tensor& bq,
                      const ad::Mask& mask) {
  const Matrix c = conv_same(slice, f, nullptr);
  const std::size_t di = wq.cols();
  Matrix e(c.size(), std::vector<double>(di, 0.0));
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t o = 0; o < di; ++o) {
      double acc = bq[o];
      for (std::size_t k = 0; k < c[t].size(); ++k) acc += c[t][k] * wq.at(k, o);
      e[t][o] = elu(acc);
    }
  }
  return e;
}

Matrix reference_attention(const Matrix& e, const ad::Mask& mask) {
  const std::size_t n = e.size(), d = e[0].size();
  Matrix out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    std::vector<double> w(n, 0.0);
    double peak = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += e[i][k] * e[j][k];
      w[j] = dot / std::sqrt(static_cast<double>(d));
      peak = std::max(peak, w[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = mask[j] ? std::exp(w[j] - peak) : 0.0;
      total += w[j];
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < d; ++k) out[i][k] += w[j] / total * e[j][k];
  }
  return out;
}

const Tensor& param(const Model& m, const std::string& name) {
  return m.params().value(*m.params().find(name));
}

std::vector<double> reference_branch(const Model& model, const std::string& prefix,
                                     const Tensor& matrix, const ad::Mask& mask) {
  const ModelConfig& cfg = model.config();
  std::size_t len = 0;
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (mask[r]) len = r + 1;
  const ad::Mask m(mask.begin(), mask.begin() + static_cast<long>(len));
  const std::size_t width = model.padded_width();
  Matrix x(len, std::vector<double>(width, 0.0));
  for (std::size_t r = 0; r < len; ++r)
    if (m[r])
      for (std::size_t c = 0; c < matrix.cols(); ++c) x[r][c] = matrix.at(r, c);

  Matrix features(len);
  if (cfg.variant == ModelVariant::kMultiHead) {
    const std::size_t s = width / cfg.heads;
    for (std::size_t i = 0; i < cfg.heads; ++i) {
      const std::string p = prefix + ".head" + std::to_string(i);
      Matrix slice(len);
      for (std::size_t r = 0; r < len; ++r)
        slice[r].assign(x[r].begin() + static_cast<long>(i * s),
                        x[r].begin() + static_cast<long>((i + 1) * s));
      const Matrix e = reference_head(slice, param(model, p + ".conv"),
                                      param(model, p + ".query_weight"),
                                      param(model, p + ".query_bias"), m);
      const Matrix a = reference_attention(e, m);
      for (std::size_t r = 0; r < len; ++r) features[r].insert(features[r].end(), a[r].begin(),
                                                                a[r].end());
    }
    const Tensor& gain = param(model, prefix + ".norm_gain");
    const Tensor& shift = param(model, prefix + ".norm_shift");
    for (auto& row : features) {
      const double n = static_cast<double>(row.size());
      const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
      double var = 0.0;
      for (double v : row) var += (v - mean) * (v - mean);
      var /= n;
      for (std::size_t c = 0; c < row.size(); ++c)
        row[c] = (row[c] - mean) / std::sqrt(var + 1e-5) * gain[c] + shift[c];
    }
  } else {
    const Tensor& bias = param(model, prefix + ".conv_bias");
    features = conv_same(x, param(model, prefix + ".conv"), &bias);
    for (std::size_t r = 0; r < len; ++r)
      for (double& v : features[r]) v = m[r] ? elu(v) : 0.0;
  }
  std::vector<double> pooled(features[0].size(), 0.0);
  double count = 0.0;
  for (std::size_t r = 0; r < len; ++r) {
    if (!m[r]) continue;
    count += 1.0;
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += features[r][c];
  }
  for (double& v : pooled) v /= count;
  return pooled;
}

std::vector<double> reference_logits(const Model& model, const PairInput& input) {
  std::vector<double> x = reference_branch(model, "word", input.word_matrix, input.word_mask);
  if (model.use_path()) {
    const auto p = reference_branch(model, "path", input.path_matrix, input.path_mask);
    x.insert(x.end(), p.begin(), p.end());
  }
  x.insert(x.end(), input.sentence_vec.begin(), input.sentence_vec.end());
  const std::size_t layers = model.config().fc_sizes.size();
  for (std::size_t k = 0; k < layers; ++k) {
    const Tensor& w = param(model, "fc" + std::to_string(k) + ".weight");
    const Tensor& b = param(model, "fc" + std::to_string(k) + ".bias");
    std::vector<double> y(w.cols());
    for (std::size_t o = 0; o < w.cols(); ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w.at(i, o);
      y[o] = k + 1 < layers ? elu(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

// ---------------------------------------------------------------------------

PairInput random_input(std::size_t max_len, std::size_t valid, std::size_t path_valid,
                       std::size_t d, std::size_t sdim, std::uint64_t seed) {
  Rng rng(seed);
  PairInput in;
  in.d = d;
  in.word_matrix = Tensor({max_len, d});
  in.path_matrix = Tensor({max_len, d});
  in.word_mask.assign(max_len, 0);
  in.path_mask.assign(max_len, 0);
  for (std::size_t r = 0; r < valid; ++r) {
    in.word_mask[r] = 1;
    for (std::size_t c = 0; c < d; ++c) in.word_matrix.at(r, c) = rng.normal();
  }
  for (std::size_t r = 0; r < path_valid; ++r) {
    in.path_mask[r] = 1;
    for (std::size_t c = 0; c < d; ++c) in.path_matrix.at(r, c) = rng.normal();
  }
  in.sentence_vec.resize(sdim);
  for (double& v : in.sentence_vec) v = rng.normal();
  return in;
}

ModelConfig small_config(ModelVariant variant, std::size_t heads = 2) {
  ModelConfig c;
  c.heads = heads;
  c.head_dim = 4;
  c.fc_sizes = {8, 5, 3};
  c.variant = variant;
  return c;
}

TEST(HeadTransform, MatchesReference) {
  Rng rng(1);
  const Tensor slice = random_tensor({6, 5}, rng);
  const Tensor f = random_tensor({3, 5, 4}, rng), wq = random_tensor({4, 4}, rng),
               bq = random_tensor({4}, rng);
  const ad::Mask mask = {1, 1, 0, 1, 1, 0};
  HeadParams head{Var::constant(f), Var::constant(wq), Var::constant(bq)};
  const Tensor got = head_transform(Var::constant(slice), head, mask).value();
  const Matrix want = reference_head(to_matrix(slice), f, wq, bq, mask);
  ASSERT_EQ(got.shape(), (Shape{6, 4}));
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(got.at(r, c), want[r][c], 1e-12);
}

TEST(ScaledDotAttention, MatchesReferenceAndRowsSumToOne) {
  Rng rng(2);
  const Tensor e = random_tensor({5, 3}, rng);
  const ad::Mask mask = {1, 0, 1, 1, 1};
  Tensor weights;
  const Tensor got = scaled_dot_attention(Var::constant(e), mask, &weights).value();
  const Matrix want = reference_attention(to_matrix(e), mask);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got.at(r, c), want[r][c], 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 5; ++c) total += weights.at(r, c);
    EXPECT_NEAR(total, mask[r] ? 1.0 : 0.0, 1e-12);
    EXPECT_EQ(weights.at(r, 1), 0.0);
  }
}

TEST(MultiHeadAttention, RejectsIndivisibleWidth) {
  AttentionBlockParams block;
  block.heads.resize(3);
  EXPECT_THROW(multi_head_self_attention(Var::constant(Tensor({2, 4})), block, {1, 1}),
               std::invalid_argument);
}

struct VariantCase {
  ModelVariant variant;
  std::size_t heads;
  bool use_path;
};

class ModelForward : public ::testing::TestWithParam<VariantCase> {};

TEST_P(ModelForward, MatchesReferenceImplementation) {
  const auto [variant, heads, use_path] = GetParam();
  const std::size_t d = 7, sdim = 3;
  const Model model(small_config(variant, heads), d, sdim, use_path, 11);
  const PairInput in = random_input(10, 6, 3, d, sdim, 5);
  Rng rng(0);
  const Tensor got = model.logits(in, model.bind(false), false, rng).value();
  const auto want = reference_logits(model, in);
  ASSERT_EQ(got.shape(), (Shape{1, 3}));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-10);
}

TEST_P(ModelForward, ProbabilitiesFormADistribution) {
  const auto [variant, heads, use_path] = GetParam();
  const Model model(small_config(variant, heads), 7, 3, use_path, 12);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = model.forward(random_input(9, 2 + s, 1 + s, 7, 3, s));
    double total = 0.0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST_P(ModelForward, PaddingLengthDoesNotChangeOutput) {
  const auto [variant, heads, use_path] = GetParam();
  const Model model(small_config(variant, heads), 7, 3, use_path, 13);
  const PairInput short_in = random_input(8, 5, 4, 7, 3, 21);
  PairInput long_in = short_in;
  long_in.word_matrix = Tensor({40, 7});
  long_in.path_matrix = Tensor({40, 7});
  std::copy_n(short_in.word_matrix.data(), 8 * 7, long_in.word_matrix.data());
  std::copy_n(short_in.path_matrix.data(), 8 * 7, long_in.path_matrix.data());
  long_in.word_mask.resize(40, 0);
  long_in.path_mask.resize(40, 0);
  EXPECT_EQ(model.forward(short_in), model.forward(long_in));
}

TEST_P(ModelForward, MaskedRowContentIsIgnored) {
  const auto [variant, heads, use_path] = GetParam();
  const Model model(small_config(variant, heads), 7, 3, use_path, 14);
  const PairInput in = random_input(8, 6, 4, 7, 3, 22);
  PairInput noisy = in;
  for (std::size_t c = 0; c < 7; ++c) {
    noisy.word_matrix.at(7, c) = 100.0 + c;
    noisy.path_matrix.at(5, c) = -50.0;
  }
  EXPECT_EQ(model.forward(in), model.forward(noisy));
}

TEST_P(ModelForward, EveryParameterReceivesGradient) {
  const auto [variant, heads, use_path] = GetParam();
  const Model model(small_config(variant, heads), 7, 3, use_path, 15);
  const auto bound = model.bind(true);
  Rng rng(3);
  Var total = Var::constant(Tensor({1}, 0.0));
  for (std::uint64_t s = 0; s < 3; ++s) {
    total = ad::add(total, loss(model.logits(random_input(9, 7, 5, 7, 3, s), bound, true, rng),
                                kAllLabels[s]));
  }
  ad::backward(total);
  for (std::size_t i = 0; i < bound.size(); ++i) {
    const Tensor& g = bound[i].grad();
    ASSERT_FALSE(g.empty()) << model.params().name(i);
    double norm = 0.0;
    for (double v : g.values()) norm += v * v;
    EXPECT_GT(norm, 0.0) << model.params().name(i);
  }
}

TEST_P(ModelForward, FullModelGradientMatchesFiniteDifferences) {
  const auto [variant, heads, use_path] = GetParam();
  const Model model(small_config(variant, heads), 5, 2, use_path, 16);
  const PairInput in = random_input(6, 4, 3, 5, 2, 9);
  const double err = testing::max_gradient_error(
      [&](const std::vector<Var>& leaves) {
        Rng rng(0);
        return loss(model.logits(in, leaves, false, rng), Label::kUncertain);
      },
      std::vector<Tensor>(model.params().values().begin(), model.params().values().end()));
  EXPECT_LT(err, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(
    Variants, ModelForward,
    ::testing::Values(VariantCase{ModelVariant::kMultiHead, 2, true},
                      VariantCase{ModelVariant::kMultiHead, 1, true},
                      VariantCase{ModelVariant::kMultiHead, 3, false},
                      VariantCase{ModelVariant::kCnnBaseline, 2, true},
                      VariantCase{ModelVariant::kCnnBaseline, 2, false}),
    [](const auto& info) {
      return std::string(info.param.variant == ModelVariant::kMultiHead ? "MultiHead" : "Cnn") +
             std::to_string(info.param.heads) + (info.param.use_path ? "Path" : "NoPath");
    });

TEST(Model, ShapesAndPaddedWidth) {
  ModelConfig c;  // defaults: 4 heads of 64, fc 256/64/3
  const Model mh(c, 141, 50, true, 1);
  EXPECT_EQ(mh.padded_width(), 144u);
  EXPECT_EQ(param(mh, "word.head0.conv").shape(), (Shape{3, 36, 64}));
  EXPECT_EQ(param(mh, "fc0.weight").shape(), (Shape{2 * 256 + 50, 256}));
  EXPECT_EQ(param(mh, "fc2.weight").shape(), (Shape{64, 3}));
  EXPECT_EQ(param(mh, "fc1.bias")[0], 0.01);
  c.variant = ModelVariant::kCnnBaseline;
  const Model cnn(c, 141, 50, false, 1);
  EXPECT_EQ(param(cnn, "word.conv").shape(), (Shape{3, 141, 256}));
  EXPECT_EQ(param(cnn, "fc0.weight").shape(), (Shape{256 + 50, 256}));
  EXPECT_FALSE(cnn.params().find("path.conv").has_value());
}

TEST(Model, SameSeedSameWeights) {
  const ModelConfig c = small_config(ModelVariant::kMultiHead);
  EXPECT_EQ(Model(c, 7, 3, true, 4).params(), Model(c, 7, 3, true, 4).params());
  EXPECT_NE(Model(c, 7, 3, true, 4).params(), Model(c, 7, 3, true, 5).params());
}

TEST(Model, DropoutOnlyInTraining) {
  const Model model(small_config(ModelVariant::kMultiHead), 7, 3, true, 6);
  const PairInput in = random_input(8, 6, 4, 7, 3, 1);
  Rng a(1), b(2);
  EXPECT_EQ(model.forward(in, false, a), model.forward(in, false, b));
  Rng c(1), d(2);
  EXPECT_NE(model.forward(in, true, c), model.forward(in, true, d));
}

TEST(Model, AttentionTraceCoversEveryHead) {
  const Model model(small_config(ModelVariant::kMultiHead, 2), 7, 3, true, 7);
  const PairInput in = random_input(12, 6, 4, 7, 3, 2);
  Rng rng(0);
  ForwardTrace trace;
  model.forward(in, false, rng, &trace);
  ASSERT_EQ(trace.word_attention.size(), 2u);
  EXPECT_EQ(trace.word_attention[0].shape(), (Shape{6, 6}));
  EXPECT_EQ(trace.path_attention[1].shape(), (Shape{4, 4}));
  EXPECT_EQ(trace.word_mask.size(), 6u);
}

TEST(Model, InputValidation) {
  const Model model(small_config(ModelVariant::kMultiHead), 7, 3, true, 8);
  PairInput in = random_input(8, 6, 4, 7, 3, 3);
  in.sentence_vec.pop_back();
  EXPECT_THROW(model.forward(in), std::invalid_argument);
  PairInput empty = random_input(8, 0, 4, 7, 3, 3);
  EXPECT_THROW(model.forward(empty), std::invalid_argument);
  PairInput wide = random_input(8, 6, 4, 9, 3, 3);
  EXPECT_THROW(model.forward(wide), std::invalid_argument);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.conv_window = 4;
  EXPECT_THROW(validate_model_config(c), std::invalid_argument);
  c = ModelConfig();
  c.fc_sizes = {10, 3};
  EXPECT_THROW(validate_model_config(c), std::invalid_argument);
  c = ModelConfig();
  c.dropout_p = 1.0;
  EXPECT_THROW(validate_model_config(c), std::invalid_argument);
  EXPECT_EQ(parse_variant("CNN_BASELINE"), ModelVariant::kCnnBaseline);
  EXPECT_FALSE(parse_variant("cnn").has_value());
}

}  // namespace
}  // namespace lesionattr
