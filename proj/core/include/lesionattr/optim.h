#ifndef LESIONATTR_OPTIM_H_
#define LESIONATTR_OPTIM_H_

#include <cstddef>
#include <span>
#include <vector>

#include "lesionattr/random.h"
#include "lesionattr/tensor.h"

namespace lesionattr {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// One bias-corrected Adam update. Moment buffers are created on first use and
// must keep matching the parameter shapes afterwards.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr);

// Xavier/Glorot normal: std = sqrt(2 / (fan_in + fan_out)). For rank-3
// convolution filters (w x c_in x c_out) the fans are w*c_in and w*c_out.
Tensor xavier_normal_init(const Shape& shape, Rng& rng);

inline constexpr double kBiasInit = 0.01;
Tensor bias_init(std::size_t n);

}  // namespace lesionattr

#endif  // LESIONATTR_OPTIM_H_
