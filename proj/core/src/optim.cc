#include "lesionattr/optim.h"

#include <cmath>
#include <stdexcept>

namespace lesionattr {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.push_back(Tensor::zeros_like(p));
      state.v.push_back(Tensor::zeros_like(p));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state built for a different parameter set");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    if (!p.same_shape(g) || !p.same_shape(m)) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

Tensor xavier_normal_init(const Shape& shape, Rng& rng) {
  double fan_in = 0.0, fan_out = 0.0;
  if (shape.size() == 2) {
    fan_in = static_cast<double>(shape[0]);
    fan_out = static_cast<double>(shape[1]);
  } else if (shape.size() == 3) {
    fan_in = static_cast<double>(shape[0] * shape[1]);
    fan_out = static_cast<double>(shape[0] * shape[2]);
  } else {
    throw std::invalid_argument("xavier_normal_init: expected rank 2 or 3, got " +
                                shape_string(shape));
  }
  const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
  Tensor out(shape);
  for (double& v : out.values()) v = stddev * rng.normal();
  return out;
}

Tensor bias_init(std::size_t n) { return Tensor({n}, kBiasInit); }

}  // namespace lesionattr
