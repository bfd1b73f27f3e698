#include "lesionattr/model.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lesionattr/optim.h"

namespace lesionattr {

std::string_view variant_name(ModelVariant variant) {
  return variant == ModelVariant::kMultiHead ? "MULTI_HEAD" : "CNN_BASELINE";
}

std::optional<ModelVariant> parse_variant(std::string_view text) {
  if (text == "MULTI_HEAD") return ModelVariant::kMultiHead;
  if (text == "CNN_BASELINE") return ModelVariant::kCnnBaseline;
  return std::nullopt;
}

void validate_model_config(const ModelConfig& config) {
  if (config.heads == 0) throw std::invalid_argument("head count must be at least 1");
  if (config.head_dim == 0) throw std::invalid_argument("head_dim must be positive");
  if (config.conv_window % 2 == 0) throw std::invalid_argument("conv_window must be odd");
  if (config.fc_sizes.size() != 3 || config.fc_sizes.back() != kNumLabels) {
    throw std::invalid_argument("fc_sizes must list three layers ending with 3");
  }
  if (config.dropout_p < 0.0 || config.dropout_p >= 1.0) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
}

ad::Var head_transform(const ad::Var& slice, const HeadParams& head, const ad::Mask& mask) {
  ad::Var local = ad::conv1d_same(slice, head.filters);
  ad::Var projected = ad::add_row_bias(ad::matmul(local, head.query_weight), head.query_bias);
  return ad::mask_rows(ad::elu(projected), mask);
}

ad::Var scaled_dot_attention(const ad::Var& e, const ad::Mask& mask, Tensor* weights) {
  if (e.value().rank() != 2 || e.value().cols() == 0) {
    throw std::invalid_argument("scaled_dot_attention: expected a non-empty l x d_i input");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(e.value().cols()));
  ad::Var scores = ad::scale(ad::matmul(e, ad::transpose(e)), inv_sqrt);
  ad::Var attention = ad::masked_softmax(scores, mask);
  if (weights) *weights = attention.value();
  return ad::matmul(attention, e);
}

ad::Var multi_head_self_attention(const ad::Var& e, const AttentionBlockParams& block,
                                  const ad::Mask& mask, std::vector<Tensor>* weights) {
  const std::size_t h = block.heads.size();
  if (h == 0) throw std::invalid_argument("multi_head_self_attention: no heads");
  const std::size_t width = e.value().cols();
  if (width % h != 0) {
    throw std::invalid_argument("multi_head_self_attention: width " + std::to_string(width) +
                                " is not a multiple of " + std::to_string(h) + " heads");
  }
  const std::size_t slice_width = width / h;
  std::vector<ad::Var> heads;
  heads.reserve(h);
  if (weights) weights->assign(h, Tensor());
  for (std::size_t i = 0; i < h; ++i) {
    ad::Var part = h == 1 ? e : ad::slice(e, 1, i * slice_width, (i + 1) * slice_width);
    ad::Var local = head_transform(part, block.heads[i], mask);
    heads.push_back(scaled_dot_attention(local, mask, weights ? &(*weights)[i] : nullptr));
  }
  ad::Var joined = h == 1 ? heads.front() : ad::concat(heads, 1);
  return ad::layer_norm(joined, block.norm_gain, block.norm_shift);
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig config, std::size_t feature_width, std::size_t sentence_dim,
             bool use_path, std::uint64_t seed)
    : config_(std::move(config)),
      feature_width_(feature_width),
      sentence_dim_(sentence_dim),
      use_path_(use_path) {
  validate_model_config(config_);
  if (feature_width_ == 0) throw std::invalid_argument("feature width must be positive");
  const std::size_t h = config_.heads;
  const std::size_t di = config_.head_dim;
  const std::size_t w = config_.conv_window;
  const bool multi = config_.variant == ModelVariant::kMultiHead;
  padded_width_ = multi ? (feature_width_ + h - 1) / h * h : feature_width_;

  Rng rng(seed);
  auto add_branch = [&](const std::string& prefix) {
    const std::size_t first = params_.size();
    if (multi) {
      const std::size_t slice = padded_width_ / h;
      for (std::size_t i = 0; i < h; ++i) {
        const std::string p = prefix + ".head" + std::to_string(i);
        params_.add(p + ".conv", xavier_normal_init({w, slice, di}, rng));
        params_.add(p + ".query_weight", xavier_normal_init({di, di}, rng));
        params_.add(p + ".query_bias", bias_init(di));
      }
      params_.add(prefix + ".norm_gain", Tensor({h * di}, 1.0));
      params_.add(prefix + ".norm_shift", Tensor({h * di}, 0.0));
    } else {
      params_.add(prefix + ".conv", xavier_normal_init({w, feature_width_, h * di}, rng));
      params_.add(prefix + ".conv_bias", bias_init(h * di));
    }
    return first;
  };
  word_branch_ = add_branch("word");
  if (use_path_) path_branch_ = add_branch("path");

  fc_first_ = params_.size();
  std::size_t in = (use_path_ ? 2 : 1) * h * di + sentence_dim_;
  for (std::size_t k = 0; k < config_.fc_sizes.size(); ++k) {
    const std::size_t out = config_.fc_sizes[k];
    params_.add("fc" + std::to_string(k) + ".weight", xavier_normal_init({in, out}, rng));
    params_.add("fc" + std::to_string(k) + ".bias", bias_init(out));
    in = out;
  }
}

std::vector<ad::Var> Model::bind(bool requires_grad) const {
  std::vector<ad::Var> bound;
  bound.reserve(params_.size());
  for (const Tensor& t : params_.values()) {
    bound.push_back(requires_grad ? ad::Var::parameter(t) : ad::Var::constant(t));
  }
  return bound;
}

ad::Var Model::branch(const Tensor& matrix, const ad::Mask& mask,
                      const std::vector<ad::Var>& bound, std::size_t first,
                      std::vector<Tensor>* weights, ad::Mask* trimmed_mask) const {
  if (matrix.rank() != 2 || matrix.cols() != feature_width_) {
    throw std::invalid_argument("input width " +
                                (matrix.rank() == 2 ? std::to_string(matrix.cols()) : "?") +
                                " does not match model feature width " +
                                std::to_string(feature_width_));
  }
  if (mask.size() != matrix.rows()) throw std::invalid_argument("mask length mismatch");
  // Rows past the last valid position never influence the result, so the
  // sequence is trimmed there; masked rows inside are zeroed.
  std::size_t len = 0;
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (mask[r]) len = r + 1;
  if (len == 0) throw std::invalid_argument("input has no valid rows");
  ad::Mask m(mask.begin(), mask.begin() + static_cast<long>(len));
  Tensor x({len, padded_width_});
  for (std::size_t r = 0; r < len; ++r) {
    if (!m[r]) continue;
    std::copy_n(matrix.data() + r * feature_width_, feature_width_, x.data() + r * padded_width_);
  }
  ad::Var input = ad::Var::constant(std::move(x));

  ad::Var features;
  if (config_.variant == ModelVariant::kMultiHead) {
    AttentionBlockParams block;
    for (std::size_t i = 0; i < config_.heads; ++i) {
      block.heads.push_back({bound[first + 3 * i], bound[first + 3 * i + 1],
                             bound[first + 3 * i + 2]});
    }
    block.norm_gain = bound[first + 3 * config_.heads];
    block.norm_shift = bound[first + 3 * config_.heads + 1];
    features = multi_head_self_attention(input, block, m, weights);
  } else {
    features = ad::mask_rows(ad::elu(ad::conv1d_same(input, bound[first], bound[first + 1])), m);
  }
  if (trimmed_mask) *trimmed_mask = m;
  return config_.pooling == PoolingMode::kAverage ? ad::masked_global_avg_pool(features, m)
                                                  : ad::masked_global_max_pool(features, m);
}

ad::Var Model::logits(const PairInput& input, const std::vector<ad::Var>& bound, bool train,
                      Rng& rng, ForwardTrace* trace) const {
  if (bound.size() != params_.size()) throw std::invalid_argument("parameter binding size mismatch");
  if (input.sentence_vec.size() != sentence_dim_) {
    throw std::invalid_argument("sentence vector width " +
                                std::to_string(input.sentence_vec.size()) + " does not match " +
                                std::to_string(sentence_dim_));
  }
  std::vector<ad::Var> pooled;
  pooled.push_back(branch(input.word_matrix, input.word_mask, bound, word_branch_,
                          trace ? &trace->word_attention : nullptr,
                          trace ? &trace->word_mask : nullptr));
  if (use_path_) {
    pooled.push_back(branch(input.path_matrix, input.path_mask, bound, path_branch_,
                            trace ? &trace->path_attention : nullptr,
                            trace ? &trace->path_mask : nullptr));
  }
  if (sentence_dim_ > 0) pooled.push_back(ad::Var::constant(Tensor::row(input.sentence_vec)));
  ad::Var x = pooled.size() == 1 ? pooled.front() : ad::concat(pooled, 1);
  const std::size_t layers = config_.fc_sizes.size();
  for (std::size_t k = 0; k < layers; ++k) {
    x = ad::dropout(x, config_.dropout_p, rng, train);
    x = ad::add_row_bias(ad::matmul(x, bound[fc_first_ + 2 * k]), bound[fc_first_ + 2 * k + 1]);
    if (k + 1 < layers) x = ad::elu(x);
  }
  return x;
}

std::array<double, kNumLabels> Model::forward(const PairInput& input, bool train, Rng& rng,
                                              ForwardTrace* trace) const {
  ad::Var z = logits(input, bind(false), train, rng, trace);
  const std::vector<double> p = ad::softmax(z.value().values());
  return {p[0], p[1], p[2]};
}

std::array<double, kNumLabels> Model::forward(const PairInput& input) const {
  Rng unused(0);
  return forward(input, false, unused);
}

ad::Var loss(const ad::Var& logits, Label gold) {
  return ad::softmax_cross_entropy(logits, label_index(gold));
}

}  // namespace lesionattr
