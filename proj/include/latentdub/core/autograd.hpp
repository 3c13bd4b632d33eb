#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "latentdub/core/tensor.hpp"

namespace latentdub::ad {

// Reverse-mode autodiff over a dynamically built graph. Nodes own their value
// and (lazily allocated) gradient. Ops append nodes; backward() runs the tape
// in reverse topological order. Graphs are per-forward-pass and freed when the
// last Var referencing them goes out of scope.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  Tensor& ensure_grad() {
    if (grad.size() == 0) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

Var constant(Tensor v);
Var leaf(Tensor v, bool requires_grad = true);

// root must be a single-element tensor; seeds d(root)/d(root) = 1
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

// --- elementwise / scalar ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var abs(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a, double eps = 0.0);
Var log(const Var& a);
Var clamp(const Var& a, double lo, double hi);  // zero gradient outside [lo, hi]
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var tanh(const Var& a);

// --- reductions ---
Var sum_all(const Var& a);   // -> [1]
Var mean_all(const Var& a);  // -> [1]

// --- 2-d matrix ops (shape [m, n]) ---
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var slice_cols(const Var& a, int c0, int c1);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
// softmax over each row; add_mask (same shape or [cols]) is added to the
// logits first, so -inf-like entries suppress attention to padded keys
Var softmax_rows(const Var& a, const Tensor* add_mask = nullptr);
// normalize each row to zero mean / unit variance, then scale+shift
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// --- shape ---
Var reshape(const Var& a, std::vector<int> shape);

// --- conv / image ops, single sample ---
// x [C,H,W], w [OC,C,kh,kw], b [OC]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// x [C,L], w [OC,C,k], b [OC]
Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample2x(const Var& x);                       // nearest, [C,H,W]
Var concat_ch(const Var& a, const Var& b);          // [Ca+Cb,H,W]
Var slice_ch(const Var& a, int c0, int c1);         // [c1-c0,H,W]
Var slice_rows(const Var& a, int y0, int y1);       // [C,y1-y0,W]
Var global_avg_pool(const Var& x);                  // [C,H,W] -> [C]

}  // namespace latentdub::ad
