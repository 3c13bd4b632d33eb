#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "latentdub/core/autograd.hpp"

namespace latentdub::nn {

using ad::Var;

// Named parameter store. Construction order is the serialization order, so a
// fixed seed reproduces identical weights.
class ParamRegistry {
 public:
  Var add(const std::string& name, Tensor init, bool trainable = true);
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  std::vector<Var> vars() const;
  std::int64_t parameter_count() const;
  void set_all_zero();  // testing hook
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

// fan-in scaled normal init
Tensor init_normal(std::mt19937_64& rng, std::vector<int> shape, double std_dev);
Tensor init_conv(std::mt19937_64& rng, int oc, int ic, int kh, int kw);
Tensor init_linear(std::mt19937_64& rng, int in, int out);

struct Conv2d {
  Var w, b;
  int stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in_ch,
         int out_ch, int k, int stride, int pad);
  Var operator()(const Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

struct Conv1d {
  Var w, b;
  int stride = 1, pad = 0;
  Conv1d() = default;
  Conv1d(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in_ch,
         int out_ch, int k, int stride, int pad);
  Var operator()(const Var& x) const { return ad::conv1d(x, w, b, stride, pad); }
};

struct Linear {
  Var w, b;  // w [in, out]
  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in, int out);
  Var operator()(const Var& x) const;  // x [rows, in] -> [rows, out]
};

struct LayerNorm {
  Var gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamRegistry& reg, const std::string& prefix, int dim);
  Var operator()(const Var& x) const { return ad::layer_norm_rows(x, gamma, beta); }
};

// Cross-attention over spatial tokens. Query side is layer-normed; context
// rows marked invalid in key_mask are excluded from the softmax.
struct CrossAttention {
  LayerNorm ln;
  Linear to_q, to_k, to_v, to_out;
  int heads = 1;
  int inner = 0;
  CrossAttention() = default;
  CrossAttention(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng,
                 int token_dim, int ctx_dim, int heads);
  // tokens [S, token_dim], ctx [L, ctx_dim], key_mask: 1 = attendable
  Var operator()(const Var& tokens, const Var& ctx, const std::vector<std::uint8_t>* key_mask) const;
};

// Adam with bias correction; deterministic given call order.
class Adam {
 public:
  explicit Adam(std::vector<Var> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad() { ad::zero_grad(params_); }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace latentdub::nn
