#include "latentdub/core/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace latentdub::nn {

Var ParamRegistry::add(const std::string& name, Tensor init, bool trainable) {
  for (const auto& [n, v] : items_)
    if (n == name) throw std::invalid_argument("ParamRegistry: duplicate name " + name);
  Var v = ad::leaf(std::move(init), trainable);
  items_.emplace_back(name, v);
  return v;
}

std::vector<Var> ParamRegistry::vars() const {
  std::vector<Var> out;
  out.reserve(items_.size());
  for (const auto& [n, v] : items_) out.push_back(v);
  return out;
}

std::int64_t ParamRegistry::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : items_) n += v->value.size();
  return n;
}

void ParamRegistry::set_all_zero() {
  for (auto& [name, v] : items_) v->value.fill(0.0);
}

std::uint64_t ParamRegistry::checksum() const {
  // FNV-1a over the raw bytes of every parameter, in registration order
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, v] : items_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v->value.data());
    const size_t n = static_cast<size_t>(v->value.size()) * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

Tensor init_normal(std::mt19937_64& rng, std::vector<int> shape, double std_dev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std_dev);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor init_conv(std::mt19937_64& rng, int oc, int ic, int kh, int kw) {
  double fan_in = static_cast<double>(ic) * kh * kw;
  return init_normal(rng, {oc, ic, kh, kw}, std::sqrt(2.0 / fan_in));
}

Tensor init_linear(std::mt19937_64& rng, int in, int out) {
  return init_normal(rng, {in, out}, std::sqrt(2.0 / in));
}

Conv2d::Conv2d(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in_ch,
               int out_ch, int k, int stride_, int pad_)
    : stride(stride_), pad(pad_) {
  w = reg.add(prefix + ".w", init_conv(rng, out_ch, in_ch, k, k));
  b = reg.add(prefix + ".b", Tensor::zeros({out_ch}));
}

Conv1d::Conv1d(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in_ch,
               int out_ch, int k, int stride_, int pad_)
    : stride(stride_), pad(pad_) {
  w = reg.add(prefix + ".w", init_normal(rng, {out_ch, in_ch, k}, std::sqrt(2.0 / (in_ch * k))));
  b = reg.add(prefix + ".b", Tensor::zeros({out_ch}));
}

Linear::Linear(ParamRegistry& reg, const std::string& prefix, std::mt19937_64& rng, int in,
               int out) {
  w = reg.add(prefix + ".w", init_linear(rng, in, out));
  b = reg.add(prefix + ".b", Tensor::zeros({out}));
}

Var Linear::operator()(const Var& x) const {
  auto y = ad::matmul(x, w);
  // broadcast bias over rows
  const int rows = y->value.dim(0), cols = y->value.dim(1);
  Tensor ones({rows, 1});
  ones.fill(1.0);
  auto b2 = ad::reshape(b, {1, cols});
  return ad::add(y, ad::matmul(ad::constant(std::move(ones)), b2));
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& prefix, int dim) {
  gamma = reg.add(prefix + ".g", Tensor::full({dim}, 1.0));
  beta = reg.add(prefix + ".b", Tensor::zeros({dim}));
}

CrossAttention::CrossAttention(ParamRegistry& reg, const std::string& prefix,
                               std::mt19937_64& rng, int token_dim, int ctx_dim, int heads_)
    : heads(heads_), inner(token_dim) {
  if (token_dim % heads_ != 0)
    throw std::invalid_argument("CrossAttention: token_dim must divide heads");
  ln = LayerNorm(reg, prefix + ".ln", token_dim);
  to_q = Linear(reg, prefix + ".q", rng, token_dim, token_dim);
  to_k = Linear(reg, prefix + ".k", rng, ctx_dim, token_dim);
  to_v = Linear(reg, prefix + ".v", rng, ctx_dim, token_dim);
  to_out = Linear(reg, prefix + ".o", rng, token_dim, token_dim);
}

Var CrossAttention::operator()(const Var& tokens, const Var& ctx,
                               const std::vector<std::uint8_t>* key_mask) const {
  const int L = ctx->value.dim(0);
  const int dh = inner / heads;
  auto q = to_q(ln(tokens));
  auto k = to_k(ctx);
  auto v = to_v(ctx);

  Tensor mask_row({L});
  bool any_masked = false;
  if (key_mask) {
    if (static_cast<int>(key_mask->size()) != L)
      throw std::invalid_argument("CrossAttention: key_mask length mismatch");
    for (int j = 0; j < L; ++j) {
      mask_row[j] = (*key_mask)[j] ? 0.0 : -1e30;
      if (!(*key_mask)[j]) any_masked = true;
    }
  }

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh);
    auto attn = ad::softmax_rows(scores, any_masked ? &mask_row : nullptr);
    head_outs.push_back(ad::matmul(attn, vh));
  }
  auto merged = heads == 1 ? head_outs[0] : ad::concat_cols(head_outs);
  return ad::add(tokens, to_out(merged));
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(Tensor::zeros(p->value.shape()));
    v_.emplace_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p->grad.size() == 0) continue;
    for (std::int64_t j = 0; j < p->value.size(); ++j) {
      double g = p->grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      p->value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace latentdub::nn
