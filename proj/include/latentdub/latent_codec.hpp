#pragma once

#include <memory>
#include <string>
#include <vector>

#include "latentdub/core/autograd.hpp"
#include "latentdub/core/image.hpp"
#include "latentdub/core/nn.hpp"

namespace latentdub {

// throws unless the image is square with values in [0,1] (+/- eps)
void validate_face_crop(const Image& img);

// rows [H/2, H) set to the mask value 0; upper rows untouched
Image occlude_lower_half(const Image& img);

class AutoencoderBackend {
 public:
  virtual ~AutoencoderBackend() = default;
  virtual int downsample_factor() const = 0;
  virtual int latent_channels() const = 0;
  virtual int input_size() const = 0;
  // deterministic latent (no posterior sampling)
  virtual Tensor encode_image(const Image& img) const = 0;
  virtual Image decode_image(const Tensor& latent) const = 0;
  // differentiable decode for the training path; output [3,H,W] in [0,1]
  virtual ad::Var decode_var(const ad::Var& latent) const = 0;
};

Tensor encode_latent(const Image& img, const AutoencoderBackend& codec);
Image decode_latent(const Tensor& latent, const AutoencoderBackend& codec);

// channel order: masked-target latent first, reference latent second
Tensor make_condition(const Tensor& masked, const Tensor& ref);
ad::Var make_condition(const ad::Var& masked, const ad::Var& ref);
Tensor condition_masked_half(const Tensor& cond);
Tensor condition_ref_half(const Tensor& cond);

struct ToyCodecConfig {
  int input_size = 64;
  int latent_channels = 4;
  int base_channels = 16;
  std::uint64_t seed = 71;
};

// Small conv autoencoder, downsample factor fixed at 8.
class ToyAutoencoder : public AutoencoderBackend {
 public:
  explicit ToyAutoencoder(const ToyCodecConfig& cfg = ToyCodecConfig{});
  int downsample_factor() const override { return 8; }
  int latent_channels() const override { return cfg_.latent_channels; }
  int input_size() const override { return cfg_.input_size; }
  Tensor encode_image(const Image& img) const override;
  Image decode_image(const Tensor& latent) const override;
  ad::Var decode_var(const ad::Var& latent) const override;

  ad::Var encode_var(const ad::Var& img_chw) const;
  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }
  const ToyCodecConfig& config() const { return cfg_; }
  void set_trainable(bool trainable);

  void save(const std::string& path) const;
  static std::unique_ptr<ToyAutoencoder> load(const std::string& path);

 private:
  ToyCodecConfig cfg_;
  nn::ParamRegistry params_;
  nn::Conv2d e1_, e2_, e3_, e4_;
  nn::Conv2d d1_, d2_, d3_, d4_, d5_;
};

struct CodecTrainConfig {
  int steps = 1500;
  int batch_size = 8;
  double lr = 2e-3;
  std::uint64_t seed = 7;
};

struct CodecTrainReport {
  std::vector<double> loss_curve;
  double final_train_mae = 0.0;
};

// reconstruction pretraining on a set of crops (L1 objective)
CodecTrainReport pretrain_toy_codec(ToyAutoencoder& codec, const std::vector<Image>& images,
                                    const CodecTrainConfig& cfg);

}  // namespace latentdub
