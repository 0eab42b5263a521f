#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ugtsr/tensor.hpp"

namespace ugtsr::ad {

// Reverse-mode autodiff over Tensor. Graphs are built eagerly; backward()
// walks the DAG in reverse topological order. value_only() builds no parent
// links, which doubles as the inference mode.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  bool needs_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

// Graph-construction mode. While value_only() is active, new nodes carry no
// parents or backward closures.
class ValueOnlyScope {
 public:
  ValueOnlyScope();
  ~ValueOnlyScope();
  ValueOnlyScope(const ValueOnlyScope&) = delete;
  ValueOnlyScope& operator=(const ValueOnlyScope&) = delete;
};
bool value_only();

Var constant(Tensor v);
Var leaf(Tensor v);  // trainable parameter node

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var abs(const Var& a);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope);
// clamp to [0,1] with unit subgradient on the closed interval (used for gates
// that must start at an exact endpoint yet keep learning)
Var clamp01(const Var& a);
Var sigmoid_clamped(const Var& logits, double eps);

// reductions
Var sum_all(const Var& a);   // -> {1}
Var mean_all(const Var& a);  // -> {1}
Var min_all(const Var& a);   // -> {1}, subgradient to the first argmin
Var sum_channels(const Var& chw);  // {C,H,W} -> {1,H,W}
Var sum_rows(const Var& a);        // {R,C} -> {R,1}

// linear algebra on rank-2 tensors
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var softmax_rows(const Var& a);

// shaping
Var reshape(const Var& a, std::vector<int> shape);
Var repeat_rows(const Var& a, int k);     // {R,C} -> {R*k,C}
Var sum_row_groups(const Var& a, int k);  // {R*k,C} -> {R,C}
Var mul_rows(const Var& a, const Var& col);  // {R,C} * {R,1} broadcast
Var concat_channels(const Var& a, const Var& b);  // {Ca,H,W}+{Cb,H,W}
Var chw_to_tokens(const Var& chw);            // {C,H,W} -> {H*W,C}
Var tokens_to_chw(const Var& t, int h, int w);

// network ops
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest(const Var& x, int factor);

// codebook bridge
Var gather_rows(const Var& table, const std::vector<int>& indices);
// forward takes `value`, backward passes gradients unchanged to x
Var straight_through(Tensor value, const Var& x);
Var detach(const Var& a);

void backward(const Var& root);  // root must be a scalar {1}
double scalar(const Var& v);

}  // namespace ugtsr::ad
