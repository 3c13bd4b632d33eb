#include "latentdub/losses.hpp"

#include <random>
#include <stdexcept>

#include "latentdub/latent_codec.hpp"

namespace latentdub {

void LossWeights::validate() const {
  if (lambda_p < 0 || mu_gan < 0 || phi_sync < 0)
    throw std::invalid_argument("LossWeights: weights must be >= 0");
}

LossWeights LossWeights::phase1() {
  LossWeights w;
  w.enable_gan = false;
  w.enable_sync = false;
  return w;
}

LossWeights LossWeights::phase2() { return LossWeights{}; }

ToyPerceptualExtractor::ToyPerceptualExtractor(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  c1_ = nn::Conv2d(params_, "c1", rng, 3, 8, 3, 1, 1);
  c2_ = nn::Conv2d(params_, "c2", rng, 8, 8, 3, 2, 1);
  c3_ = nn::Conv2d(params_, "c3", rng, 8, 8, 3, 1, 1);
  for (const auto& [name, v] : params_.items()) v->requires_grad = false;
}

std::vector<ad::Var> ToyPerceptualExtractor::taps(const ad::Var& img_chw) const {
  auto t1 = ad::gelu(c1_(img_chw));
  auto t2 = c3_(ad::gelu(c2_(t1)));
  return {t1, t2};
}

ToyDiscriminator::ToyDiscriminator(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  c1_ = nn::Conv2d(params_, "c1", rng, 3, 8, 3, 2, 1);
  c2_ = nn::Conv2d(params_, "c2", rng, 8, 16, 3, 2, 1);
  c3_ = nn::Conv2d(params_, "c3", rng, 16, 16, 3, 2, 1);
  head_ = nn::Linear(params_, "head", rng, 16, 1);
}

void ToyDiscriminator::set_trainable(bool trainable) {
  for (const auto& [name, v] : params_.items()) v->requires_grad = trainable;
}

ad::Var ToyDiscriminator::score(const ad::Var& img_chw) const {
  auto x = ad::gelu(c1_(img_chw));
  x = ad::gelu(c2_(x));
  x = ad::gelu(c3_(x));
  auto pooled = ad::reshape(ad::global_avg_pool(x), {1, 16});
  return ad::reshape(ad::sigmoid(head_(pooled)), {1});
}

ad::Var rec_loss(const ad::Var& out, const ad::Var& gt) {
  if (!out->value.same_shape(gt->value))
    throw std::invalid_argument("rec_loss: shape mismatch");
  return ad::mean_all(ad::abs(ad::sub(out, gt)));
}

double rec_loss(const Image& out, const Image& gt) {
  if (out.h != gt.h || out.w != gt.w) throw std::invalid_argument("rec_loss: shape mismatch");
  return mean_abs_diff(out, gt);
}

ad::Var perceptual_loss(const ad::Var& out, const ad::Var& gt, const PerceptualExtractor& ext) {
  if (!out->value.same_shape(gt->value))
    throw std::invalid_argument("perceptual_loss: shape mismatch");
  auto to = ext.taps(out);
  auto tg = ext.taps(gt);
  ad::Var total;
  for (size_t i = 0; i < to.size(); ++i) {
    auto term = ad::sqrt(ad::mean_all(ad::square(ad::sub(to[i], tg[i]))), 1e-12);
    total = total ? ad::add(total, term) : term;
  }
  return total;
}

double perceptual_loss(const Image& out, const Image& gt, const PerceptualExtractor& ext) {
  return perceptual_loss(ad::constant(image_to_tensor(out)), ad::constant(image_to_tensor(gt)),
                         ext)
      ->value[0];
}

namespace {

ad::Var mean_of(const std::vector<ad::Var>& scalars) {
  ad::Var acc;
  for (const auto& s : scalars) acc = acc ? ad::add(acc, s) : s;
  return ad::scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

ad::Var clamped_log_score(const DiscriminatorBackend& d, const ad::Var& img, bool one_minus) {
  auto p = ad::clamp(d.score(img), kLogEps, 1.0 - kLogEps);
  return ad::log(one_minus ? ad::add_scalar(ad::neg(p), 1.0) : p);
}

}  // namespace

ad::Var gan_g_loss(const DiscriminatorBackend& d, const std::vector<ad::Var>& outs) {
  if (outs.empty()) throw std::invalid_argument("gan_g_loss: empty batch");
  std::vector<ad::Var> logs;
  logs.reserve(outs.size());
  for (const auto& o : outs) logs.push_back(clamped_log_score(d, o, true));
  return mean_of(logs);
}

ad::Var gan_d_loss(const DiscriminatorBackend& d, const std::vector<ad::Var>& outs,
                   const std::vector<ad::Var>& gts) {
  if (outs.empty() || gts.empty()) throw std::invalid_argument("gan_d_loss: empty batch");
  std::vector<ad::Var> gt_logs, out_logs;
  for (const auto& g : gts) gt_logs.push_back(clamped_log_score(d, g, true));
  for (const auto& o : outs) out_logs.push_back(clamped_log_score(d, o, false));
  return ad::add(mean_of(gt_logs), mean_of(out_logs));
}

ad::Var sync_loss(const SyncScorer& scorer, const std::vector<AudioWindow>& windows,
                  const std::vector<std::vector<ad::Var>>& clips) {
  if (windows.size() != clips.size() || windows.empty())
    throw std::invalid_argument("sync_loss: pair count mismatch");
  std::vector<ad::Var> terms;
  terms.reserve(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    if (static_cast<int>(clips[i].size()) != scorer.clip_frames())
      throw std::invalid_argument("sync_loss: clip length does not match expert window");
    auto p = ad::clamp(scorer.p_sync_var(windows[i], clips[i]), kLogEps, 1.0);
    terms.push_back(ad::neg(ad::log(p)));
  }
  return mean_of(terms);
}

double total_loss(const LossParts& parts, const LossWeights& w) {
  w.validate();
  double total = 0.0;
  if (w.enable_rec) total += parts.rec;
  if (w.enable_perceptual) total += w.lambda_p * parts.p;
  if (w.enable_gan) total += w.mu_gan * parts.gan;
  if (w.enable_sync) total += w.phi_sync * parts.sync;
  return total;
}

ad::Var total_loss_var(const ad::Var& rec, const ad::Var& p, const ad::Var& gan,
                       const ad::Var& sync, const LossWeights& w) {
  w.validate();
  ad::Var total;
  auto accumulate = [&](const ad::Var& term, double weight, bool enabled) {
    if (!enabled || !term) return;
    auto scaled = weight == 1.0 ? term : ad::scale(term, weight);
    total = total ? ad::add(total, scaled) : scaled;
  };
  accumulate(rec, 1.0, w.enable_rec);
  accumulate(p, w.lambda_p, w.enable_perceptual);
  accumulate(gan, w.mu_gan, w.enable_gan);
  accumulate(sync, w.phi_sync, w.enable_sync);
  if (!total) total = ad::constant(Tensor::scalar(0.0));
  return total;
}

}  // namespace latentdub
