#ifndef LESIONATTR_AUTOGRAD_H_
#define LESIONATTR_AUTOGRAD_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lesionattr/random.h"
#include "lesionattr/tensor.h"

// Reverse-mode automatic differentiation over dense tensors.
//
// Every op returns a Var wrapping a graph node that holds the forward value,
// references to its inputs, and a closure that pushes the node's gradient to
// the inputs that require one. Graphs are built per example and released when
// the last Var referencing them goes away; parameter leaves outlive them and
// accumulate gradients across backward passes until zero_grad().
namespace lesionattr::ad {

using Mask = std::vector<std::uint8_t>;

struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  // Gradient accumulator, zero-initialized on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Var make_result(Tensor value, std::vector<Var> inputs,
                         std::function<void(Node&)> backward);
};

// Creates an interior node. `backward` receives the node itself; inputs are
// reachable through node.parents in the order given.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Seeds d(loss)/d(loss) = 1 and propagates in reverse topological order.
// `loss` must hold exactly one element.
void backward(const Var& loss);

// Linear algebra and elementwise ops.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// x: m x n, bias: n (any shape with n elements), broadcast over rows.
Var add_row_bias(const Var& x, const Var& bias);
Var sum(const Var& a);

// Shape ops. Axis semantics follow row-major layout for any rank.
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);

// x: l x c_in, filters: w x c_in x c_out (w odd), bias: c_out or undefined.
// Zero-padded so the output keeps l rows.
Var conv1d_same(const Var& x, const Var& filters, const Var& bias = Var());

// Row-wise softmax over the columns whose mask entry is 1. Rows belonging to
// masked-out queries and masked-out columns are exactly zero.
Var masked_softmax(const Var& scores, const Mask& mask);

Var elu(const Var& x);

// Per-row normalization to zero mean, unit variance followed by gain/shift.
Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps = 1e-5);

// Inverted dropout; identity when !train or p == 0.
Var dropout(const Var& x, double p, Rng& rng, bool train);

// Zeroes rows whose mask entry is 0.
Var mask_rows(const Var& x, const Mask& mask);

// Masked reductions over rows; result is 1 x d.
Var masked_global_avg_pool(const Var& x, const Mask& mask);
Var masked_global_max_pool(const Var& x, const Mask& mask);

// Mean negative log-likelihood of `gold` under softmax(logits). logits holds
// the class scores (any shape); result has one element.
Var softmax_cross_entropy(const Var& logits, std::size_t gold);

// Numerically stable softmax of a plain vector.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace lesionattr::ad

#endif  // LESIONATTR_AUTOGRAD_H_
