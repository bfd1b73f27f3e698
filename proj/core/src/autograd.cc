#include "lesionattr/autograd.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace lesionattr::ad {
namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got shape " +
                        shape_string(t.shape()));
  }
}

void require_mask(const std::string& op, const Mask& mask, std::size_t rows) {
  if (mask.size() != rows) {
    shape_error(op, "mask length " + std::to_string(mask.size()) + " does not match " +
                        std::to_string(rows) + " rows");
  }
}

std::size_t mask_count(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                [](std::uint8_t m) { return m != 0; }));
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor::zeros_like(value);
  if (grad.shape() != value.shape()) grad = Tensor::zeros_like(value);
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (!in.defined()) continue;
    node->requires_grad = node->requires_grad || in.requires_grad();
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (Var& in : inputs) node->parents.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must hold exactly one element");
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank("matmul", A, 2);
  require_rank("matmul", B, 2);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    shape_error("matmul", "inner dimensions differ: " + shape_string(A.shape()) + " x " +
                              shape_string(B.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.at(i, p);
      if (aip == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const Tensor& G = self.grad;
    if (na.requires_grad) {
      Tensor& ga = na.grad_buffer();
      const Tensor& Bv = nb.value;
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = Bv.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga.at(i, p) += acc;
        }
      }
    }
    if (nb.requires_grad) {
      Tensor& gb = nb.grad_buffer();
      const Tensor& Av = na.value;
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = Av.at(i, p);
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var transpose(const Var& a) {
  const Tensor& A = a.value();
  require_rank("transpose", A, 2);
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
  return make_result(std::move(out), {a}, [m, n](Node& self) {
    Tensor& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += self.grad.at(j, i);
  });
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out = a.value();
  out.add_inplace(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (parent->requires_grad) parent->grad_buffer().add_inplace(self.grad);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_error("mul", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    if (na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  const Tensor& X = x.value();
  require_rank("add_row_bias", X, 2);
  const std::size_t m = X.rows(), n = X.cols();
  if (bias.value().size() != n) {
    shape_error("add_row_bias", "bias of " + std::to_string(bias.value().size()) +
                                    " elements for " + std::to_string(n) + " columns");
  }
  Tensor out = X;
  const double* b = bias.value().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b[j];
  return make_result(std::move(out), {x, bias}, [m, n](Node& self) {
    Node& nx = *self.parents[0];
    Node& nb = *self.parents[1];
    if (nx.requires_grad) nx.grad_buffer().add_inplace(self.grad);
    if (nb.requires_grad) {
      Tensor& gb = nb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad.at(i, j);
    }
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return make_result(Tensor({1}, std::vector<double>{total}), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0];
    for (double& v : g.values()) v += up;
  });
}

// ---------------------------------------------------------------------------
// Shape ops

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error("concat", "axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", "rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        shape_error("concat", shape_string(s) + " incompatible with " + shape_string(first));
      }
    }
    offsets.push_back(out_shape[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view(out_shape, axis);
  Tensor out(out_shape);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& src = parts[k].value();
    const AxisView pv = axis_view(src.shape(), axis);
    for (std::size_t o = 0; o < pv.outer; ++o) {
      const double* s = src.data() + o * pv.extent * pv.inner;
      double* d = out.data() + (o * ov.extent + offsets[k]) * ov.inner;
      std::copy(s, s + pv.extent * pv.inner, d);
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [axis, offsets, ov](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& parent = *self.parents[k];
      if (!parent.requires_grad) continue;
      Tensor& g = parent.grad_buffer();
      const AxisView pv = axis_view(parent.value.shape(), axis);
      for (std::size_t o = 0; o < pv.outer; ++o) {
        const double* s = self.grad.data() + (o * ov.extent + offsets[k]) * ov.inner;
        double* d = g.data() + o * pv.extent * pv.inner;
        for (std::size_t i = 0; i < pv.extent * pv.inner; ++i) d[i] += s[i];
      }
    }
  });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& shape = a.shape();
  if (axis >= shape.size()) shape_error("slice", "axis out of range");
  if (begin > end || end > shape[axis]) {
    shape_error("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") outside extent " + std::to_string(shape[axis]));
  }
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  const AxisView iv = axis_view(shape, axis);
  const std::size_t width = (end - begin) * iv.inner;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < iv.outer; ++o) {
    const double* s = a.value().data() + (o * iv.extent + begin) * iv.inner;
    std::copy(s, s + width, out.data() + o * width);
  }
  return make_result(std::move(out), {a}, [iv, begin, width](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < iv.outer; ++o) {
      double* d = g.data() + (o * iv.extent + begin) * iv.inner;
      const double* s = self.grad.data() + o * width;
      for (std::size_t i = 0; i < width; ++i) d[i] += s[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution

Var conv1d_same(const Var& x, const Var& filters, const Var& bias) {
  const Tensor& X = x.value();
  const Tensor& W = filters.value();
  require_rank("conv1d_same", X, 2);
  require_rank("conv1d_same", W, 3);
  const std::size_t len = X.rows(), c_in = X.cols();
  const std::size_t width = W.dim(0), c_out = W.dim(2);
  if (width % 2 == 0) shape_error("conv1d_same", "window width must be odd");
  if (W.dim(1) != c_in) {
    shape_error("conv1d_same", "filters " + shape_string(W.shape()) + " for input " +
                                   shape_string(X.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != c_out) {
    shape_error("conv1d_same", "bias length does not match output channels");
  }
  const long radius = static_cast<long>(width / 2);

  Tensor out({len, c_out});
  for (std::size_t t = 0; t < len; ++t) {
    double* orow = out.data() + t * c_out;
    if (has_bias) std::copy_n(bias.value().data(), c_out, orow);
    for (std::size_t j = 0; j < width; ++j) {
      const long src = static_cast<long>(t) + static_cast<long>(j) - radius;
      if (src < 0 || src >= static_cast<long>(len)) continue;
      const double* xrow = X.data() + static_cast<std::size_t>(src) * c_in;
      const double* wtap = W.data() + j * c_in * c_out;
      for (std::size_t c = 0; c < c_in; ++c) {
        const double xv = xrow[c];
        if (xv == 0.0) continue;
        const double* wrow = wtap + c * c_out;
        for (std::size_t o = 0; o < c_out; ++o) orow[o] += xv * wrow[o];
      }
    }
  }

  std::vector<Var> inputs{x, filters};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      std::move(out), std::move(inputs), [len, c_in, c_out, width, radius, has_bias](Node& self) {
        Node& nx = *self.parents[0];
        Node& nw = *self.parents[1];
        const Tensor& G = self.grad;
        Tensor* gx = nx.requires_grad ? &nx.grad_buffer() : nullptr;
        Tensor* gw = nw.requires_grad ? &nw.grad_buffer() : nullptr;
        for (std::size_t t = 0; t < len; ++t) {
          const double* grow = G.data() + t * c_out;
          for (std::size_t j = 0; j < width; ++j) {
            const long src = static_cast<long>(t) + static_cast<long>(j) - radius;
            if (src < 0 || src >= static_cast<long>(len)) continue;
            const std::size_t s = static_cast<std::size_t>(src);
            const double* xrow = nx.value.data() + s * c_in;
            const double* wtap = nw.value.data() + j * c_in * c_out;
            for (std::size_t c = 0; c < c_in; ++c) {
              const double* wrow = wtap + c * c_out;
              if (gx) {
                double acc = 0.0;
                for (std::size_t o = 0; o < c_out; ++o) acc += grow[o] * wrow[o];
                gx->data()[s * c_in + c] += acc;
              }
              if (gw) {
                const double xv = xrow[c];
                if (xv == 0.0) continue;
                double* gwrow = gw->data() + (j * c_in + c) * c_out;
                for (std::size_t o = 0; o < c_out; ++o) gwrow[o] += xv * grow[o];
              }
            }
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          Tensor& gb = self.parents[2]->grad_buffer();
          for (std::size_t t = 0; t < len; ++t)
            for (std::size_t o = 0; o < c_out; ++o) gb[o] += G.at(t, o);
        }
      });
}

// ---------------------------------------------------------------------------
// Attention pieces

Var masked_softmax(const Var& scores, const Mask& mask) {
  const Tensor& S = scores.value();
  require_rank("masked_softmax", S, 2);
  const std::size_t n = S.rows();
  if (S.cols() != n) shape_error("masked_softmax", "scores must be square");
  require_mask("masked_softmax", mask, n);
  if (mask_count(mask) == 0) shape_error("masked_softmax", "mask has no valid entries");

  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) peak = std::max(peak, S.at(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      const double e = std::exp(S.at(i, j) - peak);
      out.at(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= total;
  }
  return make_result(std::move(out), {scores}, [n](Node& self) {
    Tensor& gs = self.parents[0]->grad_buffer();
    const Tensor& P = self.value;
    const Tensor& G = self.grad;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += P.at(i, j) * G.at(i, j);
      for (std::size_t j = 0; j < n; ++j) gs.at(i, j) += P.at(i, j) * (G.at(i, j) - dot);
    }
  });
}

Var elu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values())
    if (v <= 0.0) v = std::expm1(v);
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& in = self.parents[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double slope = in[i] > 0.0 ? 1.0 : self.value[i] + 1.0;
      g[i] += self.grad[i] * slope;
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps) {
  const Tensor& X = x.value();
  require_rank("layer_norm", X, 2);
  const std::size_t rows = X.rows(), d = X.cols();
  if (gain.value().size() != d || shift.value().size() != d) {
    shape_error("layer_norm", "gain/shift length does not match " + std::to_string(d));
  }
  Tensor normalized({rows, d});
  std::vector<double> inv_std(rows);
  Tensor out({rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (xr[c] - mean) * inv_std[r];
      normalized.at(r, c) = xhat;
      out.at(r, c) = xhat * gain.value()[c] + shift.value()[c];
    }
  }
  return make_result(
      std::move(out), {x, gain, shift},
      [rows, d, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = *self.parents[0];
        Node& ng = *self.parents[1];
        Node& nb = *self.parents[2];
        const Tensor& G = self.grad;
        if (ng.requires_grad) {
          Tensor& gg = ng.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gg[c] += G.at(r, c) * normalized.at(r, c);
        }
        if (nb.requires_grad) {
          Tensor& gb = nb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gb[c] += G.at(r, c);
        }
        if (nx.requires_grad) {
          Tensor& gx = nx.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          std::vector<double> gxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              gxhat[c] = G.at(r, c) * ng.value[c];
              sum_g += gxhat[c];
              sum_gx += gxhat[c] * normalized.at(r, c);
            }
            for (std::size_t c = 0; c < d; ++c) {
              gx.at(r, c) += inv_std[r] *
                             (gxhat[c] - inv_d * sum_g - inv_d * normalized.at(r, c) * sum_gx);
            }
          }
        }
      });
}

Var dropout(const Var& x, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (!train || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask = Tensor::zeros_like(x.value());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  return make_result(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var mask_rows(const Var& x, const Mask& mask) {
  const Tensor& X = x.value();
  require_rank("mask_rows", X, 2);
  require_mask("mask_rows", mask, X.rows());
  const std::size_t d = X.cols();
  Tensor out = X;
  for (std::size_t r = 0; r < X.rows(); ++r)
    if (!mask[r]) std::fill_n(out.data() + r * d, d, 0.0);
  return make_result(std::move(out), {x}, [mask, d](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < mask.size(); ++r) {
      if (!mask[r]) continue;
      for (std::size_t c = 0; c < d; ++c) g.at(r, c) += self.grad.at(r, c);
    }
  });
}

Var masked_global_avg_pool(const Var& x, const Mask& mask) {
  const Tensor& X = x.value();
  require_rank("masked_global_avg_pool", X, 2);
  require_mask("masked_global_avg_pool", mask, X.rows());
  const std::size_t count = mask_count(mask);
  if (count == 0) shape_error("masked_global_avg_pool", "mask has no valid rows");
  const std::size_t d = X.cols();
  Tensor out({1, d});
  for (std::size_t r = 0; r < X.rows(); ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < d; ++c) out[c] += X.at(r, c);
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : out.values()) v *= inv;
  return make_result(std::move(out), {x}, [mask, d, inv](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < mask.size(); ++r) {
      if (!mask[r]) continue;
      for (std::size_t c = 0; c < d; ++c) g.at(r, c) += self.grad[c] * inv;
    }
  });
}

Var masked_global_max_pool(const Var& x, const Mask& mask) {
  const Tensor& X = x.value();
  require_rank("masked_global_max_pool", X, 2);
  require_mask("masked_global_max_pool", mask, X.rows());
  if (mask_count(mask) == 0) shape_error("masked_global_max_pool", "mask has no valid rows");
  const std::size_t d = X.cols();
  Tensor out({1, d}, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < d; ++c) {
      if (X.at(r, c) > out[c]) {
        out[c] = X.at(r, c);
        argmax[c] = r;
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax), d](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < d; ++c) g.at(argmax[c], c) += self.grad[c];
  });
}

Var softmax_cross_entropy(const Var& logits, std::size_t gold) {
  const Tensor& Z = logits.value();
  if (gold >= Z.size()) {
    throw std::invalid_argument("softmax_cross_entropy: gold index out of range");
  }
  std::vector<double> probs = softmax(Z.values());
  double peak = -std::numeric_limits<double>::infinity();
  for (double z : Z.values()) peak = std::max(peak, z);
  double total = 0.0;
  for (double z : Z.values()) total += std::exp(z - peak);
  const double loss = peak + std::log(total) - Z[gold];
  return make_result(Tensor({1}, std::vector<double>{loss}), {logits},
                     [probs = std::move(probs), gold](Node& self) {
                       Tensor& g = self.parents[0]->grad_buffer();
                       const double up = self.grad[0];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += up * (probs[i] - (i == gold ? 1.0 : 0.0));
                       }
                     });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace lesionattr::ad
