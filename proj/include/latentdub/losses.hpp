#pragma once

#include <memory>
#include <vector>

#include "latentdub/audio_features.hpp"
#include "latentdub/core/image.hpp"
#include "latentdub/core/nn.hpp"

namespace latentdub {

// log-safety clamp inside every log()
inline constexpr double kLogEps = 1e-7;

struct LossWeights {
  double lambda_p = 0.01;  // perceptual
  double mu_gan = 0.01;    // generator-side GAN term
  double phi_sync = 0.03;  // sync
  bool enable_rec = true;
  bool enable_perceptual = true;
  bool enable_gan = true;
  bool enable_sync = true;

  void validate() const;
  static LossWeights phase1();  // reconstruction + perceptual only
  static LossWeights phase2();  // all four terms
};

struct LossParts {
  double rec = 0.0, p = 0.0, gan = 0.0, sync = 0.0;
};

// fixed feature network with layer taps
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual std::vector<ad::Var> taps(const ad::Var& img_chw) const = 0;
};

// frozen 3-conv feature net, two taps
class ToyPerceptualExtractor : public PerceptualExtractor {
 public:
  explicit ToyPerceptualExtractor(std::uint64_t seed = 31);
  std::vector<ad::Var> taps(const ad::Var& img_chw) const override;

 private:
  nn::ParamRegistry params_;
  nn::Conv2d c1_, c2_, c3_;
};

// testing backend: the image itself is the single tap
class IdentityExtractor : public PerceptualExtractor {
 public:
  std::vector<ad::Var> taps(const ad::Var& img_chw) const override { return {img_chw}; }
};

class DiscriminatorBackend {
 public:
  virtual ~DiscriminatorBackend() = default;
  // probability in (0,1) that the image is ground truth
  virtual ad::Var score(const ad::Var& img_chw) const = 0;
};

class ToyDiscriminator : public DiscriminatorBackend {
 public:
  explicit ToyDiscriminator(std::uint64_t seed = 47);
  ad::Var score(const ad::Var& img_chw) const override;
  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }
  void set_trainable(bool trainable);

 private:
  nn::ParamRegistry params_;
  nn::Conv2d c1_, c2_, c3_;
  nn::Linear head_;
};

// testing hook: constant probability
class ConstantDiscriminator : public DiscriminatorBackend {
 public:
  explicit ConstantDiscriminator(double p) : p_(p) {}
  ad::Var score(const ad::Var&) const override { return ad::constant(Tensor::scalar(p_)); }

 private:
  double p_;
};

// scores one (audio window, N-frame clip) pair; implemented by the sync expert
class SyncScorer {
 public:
  virtual ~SyncScorer() = default;
  virtual int clip_frames() const = 0;
  virtual ad::Var p_sync_var(const AudioWindow& audio,
                             const std::vector<ad::Var>& clip_chw) const = 0;
};

// mean absolute pixel difference
ad::Var rec_loss(const ad::Var& out, const ad::Var& gt);
double rec_loss(const Image& out, const Image& gt);

// sum over taps of sqrt(mean squared feature difference)
ad::Var perceptual_loss(const ad::Var& out, const ad::Var& gt, const PerceptualExtractor& ext);
double perceptual_loss(const Image& out, const Image& gt, const PerceptualExtractor& ext);

// mean over the batch of log(1 - D(out)); minimizing pushes D(out) -> 1
ad::Var gan_g_loss(const DiscriminatorBackend& d, const std::vector<ad::Var>& outs);
// mean log(1 - D(gt)) + mean log(D(out)), exactly as printed
ad::Var gan_d_loss(const DiscriminatorBackend& d, const std::vector<ad::Var>& outs,
                   const std::vector<ad::Var>& gts);

// (1/N) sum of -log P_sync over (window, clip) pairs
ad::Var sync_loss(const SyncScorer& scorer, const std::vector<AudioWindow>& windows,
                  const std::vector<std::vector<ad::Var>>& clips);

double total_loss(const LossParts& parts, const LossWeights& w);
ad::Var total_loss_var(const ad::Var& rec, const ad::Var& p, const ad::Var& gan,
                       const ad::Var& sync, const LossWeights& w);

}  // namespace latentdub
