#ifndef LESIONATTR_MODEL_H_
#define LESIONATTR_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesionattr/autograd.h"
#include "lesionattr/corpus.h"
#include "lesionattr/features.h"
#include "lesionattr/params.h"
#include "lesionattr/random.h"

namespace lesionattr {

enum class ModelVariant { kCnnBaseline, kMultiHead };
enum class PoolingMode { kAverage, kMax };

std::string_view variant_name(ModelVariant variant);
std::optional<ModelVariant> parse_variant(std::string_view text);

struct ModelConfig {
  std::size_t heads = 4;
  std::size_t head_dim = 64;  // conv filters per head
  std::size_t conv_window = 3;
  std::vector<std::size_t> fc_sizes = {256, 64, 3};
  double dropout_p = 0.5;
  ModelVariant variant = ModelVariant::kMultiHead;
  PoolingMode pooling = PoolingMode::kAverage;
};

void validate_model_config(const ModelConfig& config);

// Parameters of one attention head: convolution over its feature slice, then
// a pointwise query projection with bias.
struct HeadParams {
  ad::Var filters;       // window x slice_width x head_dim
  ad::Var query_weight;  // head_dim x head_dim
  ad::Var query_bias;    // head_dim
};

struct AttentionBlockParams {
  std::vector<HeadParams> heads;
  ad::Var norm_gain;
  ad::Var norm_shift;
};

// ELU(conv1d_same(slice) * W_q + b_q) with masked rows zeroed.
ad::Var head_transform(const ad::Var& slice, const HeadParams& head, const ad::Mask& mask);

// softmax(E E^T / sqrt(d_i)) E over unmasked positions. When `weights` is
// non-null the attention matrix is copied into it.
ad::Var scaled_dot_attention(const ad::Var& e, const ad::Mask& mask, Tensor* weights = nullptr);

// Splits the feature axis into equal slices, one per head, concatenates the
// attended heads and applies layer normalization. The input width must be a
// multiple of the head count.
ad::Var multi_head_self_attention(const ad::Var& e, const AttentionBlockParams& block,
                                  const ad::Mask& mask, std::vector<Tensor>* weights = nullptr);

// Optional diagnostics captured during a forward pass.
struct ForwardTrace {
  std::vector<Tensor> word_attention;
  std::vector<Tensor> path_attention;
  ad::Mask word_mask;  // trimmed masks matching the attention matrices
  ad::Mask path_mask;
};

class Model {
 public:
  // `feature_width` is the PairInput row width d, `sentence_dim` the length of
  // sentence_vec. Weights are drawn from `seed`.
  Model(ModelConfig config, std::size_t feature_width, std::size_t sentence_dim, bool use_path,
        std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t feature_width() const { return feature_width_; }
  std::size_t padded_width() const { return padded_width_; }
  std::size_t sentence_dim() const { return sentence_dim_; }
  bool use_path() const { return use_path_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Leaf Vars over copies of the current parameter values.
  std::vector<ad::Var> bind(bool requires_grad) const;

  // Class scores (1 x 3) for one input under the given binding.
  ad::Var logits(const PairInput& input, const std::vector<ad::Var>& bound, bool train, Rng& rng,
                 ForwardTrace* trace = nullptr) const;

  // Class probabilities with the current parameters.
  std::array<double, kNumLabels> forward(const PairInput& input, bool train, Rng& rng,
                                         ForwardTrace* trace = nullptr) const;
  std::array<double, kNumLabels> forward(const PairInput& input) const;

 private:
  ad::Var branch(const Tensor& matrix, const ad::Mask& mask, const std::vector<ad::Var>& bound,
                 std::size_t first_param, std::vector<Tensor>* weights,
                 ad::Mask* trimmed_mask) const;

  ModelConfig config_;
  std::size_t feature_width_;
  std::size_t padded_width_;
  std::size_t sentence_dim_;
  bool use_path_;
  ParamStore params_;
  std::size_t word_branch_ = 0;
  std::size_t path_branch_ = 0;
  std::size_t fc_first_ = 0;
};

// Cross-entropy of the gold class under softmax(logits).
ad::Var loss(const ad::Var& logits, Label gold);

}  // namespace lesionattr

#endif  // LESIONATTR_MODEL_H_
