#include "latentdub/latent_codec.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

#include "latentdub/core/checkpoint.hpp"

namespace latentdub {

void validate_face_crop(const Image& img) {
  if (img.empty()) throw std::invalid_argument("FaceCrop: empty image");
  if (img.h != img.w) throw std::invalid_argument("FaceCrop: must be square");
  constexpr double eps = 1e-9;
  for (double v : img.px) {
    if (!std::isfinite(v) || v < -eps || v > 1.0 + eps)
      throw std::invalid_argument("FaceCrop: pixel outside [0,1]");
  }
}

Image occlude_lower_half(const Image& img) {
  validate_face_crop(img);
  Image out = img;
  for (int y = img.h / 2; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0.0;
  return out;
}

Tensor encode_latent(const Image& img, const AutoencoderBackend& codec) {
  if (img.h != codec.input_size() || img.w != codec.input_size())
    throw std::invalid_argument("encode_latent: image size does not match codec input size");
  return codec.encode_image(img);
}

Image decode_latent(const Tensor& latent, const AutoencoderBackend& codec) {
  return codec.decode_image(latent);
}

Tensor make_condition(const Tensor& masked, const Tensor& ref) {
  if (masked.ndim() != 3 || !masked.same_shape(ref))
    throw std::invalid_argument("make_condition: latent shape mismatch");
  const int c = masked.dim(0), h = masked.dim(1), w = masked.dim(2);
  Tensor out({2 * c, h, w});
  std::copy(masked.data(), masked.data() + masked.size(), out.data());
  std::copy(ref.data(), ref.data() + ref.size(), out.data() + masked.size());
  return out;
}

ad::Var make_condition(const ad::Var& masked, const ad::Var& ref) {
  if (!masked->value.same_shape(ref->value))
    throw std::invalid_argument("make_condition: latent shape mismatch");
  return ad::concat_ch(masked, ref);
}

Tensor condition_masked_half(const Tensor& cond) {
  const int c2 = cond.dim(0);
  Tensor out({c2 / 2, cond.dim(1), cond.dim(2)});
  std::copy(cond.data(), cond.data() + out.size(), out.data());
  return out;
}

Tensor condition_ref_half(const Tensor& cond) {
  const int c2 = cond.dim(0);
  Tensor out({c2 / 2, cond.dim(1), cond.dim(2)});
  std::copy(cond.data() + out.size(), cond.data() + cond.size(), out.data());
  return out;
}

ToyAutoencoder::ToyAutoencoder(const ToyCodecConfig& cfg) : cfg_(cfg) {
  if (cfg.input_size % 8 != 0)
    throw std::invalid_argument("ToyAutoencoder: input_size must be divisible by 8");
  std::mt19937_64 rng(cfg.seed);
  const int b = cfg.base_channels, c = cfg.latent_channels;
  e1_ = nn::Conv2d(params_, "e1", rng, 3, b, 3, 2, 1);
  e2_ = nn::Conv2d(params_, "e2", rng, b, 2 * b, 3, 2, 1);
  e3_ = nn::Conv2d(params_, "e3", rng, 2 * b, 2 * b, 3, 2, 1);
  e4_ = nn::Conv2d(params_, "e4", rng, 2 * b, c, 3, 1, 1);
  d1_ = nn::Conv2d(params_, "d1", rng, c, 2 * b, 3, 1, 1);
  d2_ = nn::Conv2d(params_, "d2", rng, 2 * b, 2 * b, 3, 1, 1);
  d3_ = nn::Conv2d(params_, "d3", rng, 2 * b, b, 3, 1, 1);
  d4_ = nn::Conv2d(params_, "d4", rng, b, b, 3, 1, 1);
  d5_ = nn::Conv2d(params_, "d5", rng, b, 3, 3, 1, 1);
  set_trainable(false);
}

void ToyAutoencoder::set_trainable(bool trainable) {
  for (const auto& [name, v] : params_.items()) v->requires_grad = trainable;
}

ad::Var ToyAutoencoder::encode_var(const ad::Var& img_chw) const {
  auto x = ad::gelu(e1_(img_chw));
  x = ad::gelu(e2_(x));
  x = ad::gelu(e3_(x));
  return e4_(x);
}

ad::Var ToyAutoencoder::decode_var(const ad::Var& latent) const {
  auto x = ad::gelu(d1_(latent));
  x = ad::gelu(d2_(ad::upsample2x(x)));
  x = ad::gelu(d3_(ad::upsample2x(x)));
  x = ad::gelu(d4_(ad::upsample2x(x)));
  return ad::sigmoid(d5_(x));
}

Tensor ToyAutoencoder::encode_image(const Image& img) const {
  return encode_var(ad::constant(image_to_tensor(img)))->value;
}

Image ToyAutoencoder::decode_image(const Tensor& latent) const {
  if (latent.ndim() != 3 || latent.dim(0) != cfg_.latent_channels)
    throw std::invalid_argument("decode_image: latent shape mismatch");
  return tensor_to_image(decode_var(ad::constant(latent))->value);
}

void ToyAutoencoder::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["input_size"] = cfg_.input_size;
  cfg["latent_channels"] = cfg_.latent_channels;
  cfg["base_channels"] = cfg_.base_channels;
  cfg["seed"] = cfg_.seed;
  cfg["downsample_factor"] = downsample_factor();
  save_checkpoint(path, "autoencoder", cfg, params_);
}

std::unique_ptr<ToyAutoencoder> ToyAutoencoder::load(const std::string& path) {
  auto manifest = read_checkpoint_manifest(path);
  const auto& cfgj = manifest.at("config");
  ToyCodecConfig cfg;
  cfg.input_size = cfgj.at("input_size").get<int>();
  cfg.latent_channels = cfgj.at("latent_channels").get<int>();
  cfg.base_channels = cfgj.at("base_channels").get<int>();
  cfg.seed = cfgj.at("seed").get<std::uint64_t>();
  auto codec = std::make_unique<ToyAutoencoder>(cfg);
  load_checkpoint(path, "autoencoder", codec->params());
  codec->set_trainable(false);
  return codec;
}

CodecTrainReport pretrain_toy_codec(ToyAutoencoder& codec, const std::vector<Image>& images,
                                    const CodecTrainConfig& cfg) {
  if (images.empty()) throw std::invalid_argument("pretrain_toy_codec: no images");
  for (const auto& img : images) {
    validate_face_crop(img);
    if (img.h != codec.input_size())
      throw std::invalid_argument("pretrain_toy_codec: image size mismatch");
  }
  codec.set_trainable(true);
  nn::Adam opt(codec.params().vars(), cfg.lr);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, images.size() - 1);

  CodecTrainReport report;
  report.loss_curve.reserve(static_cast<size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    ad::Var loss;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Image& img = images[pick(rng)];
      auto x = ad::constant(image_to_tensor(img));
      auto recon = codec.decode_var(codec.encode_var(x));
      auto term = ad::mean_all(ad::abs(ad::sub(recon, x)));
      loss = loss ? ad::add(loss, term) : term;
    }
    loss = ad::scale(loss, 1.0 / cfg.batch_size);
    ad::backward(loss);
    opt.step();
    report.loss_curve.push_back(loss->value[0]);
  }
  codec.set_trainable(false);

  double mae = 0.0;
  for (const auto& img : images) {
    auto recon = codec.decode_image(codec.encode_image(img));
    mae += mean_abs_diff(recon, img);
  }
  report.final_train_mae = mae / static_cast<double>(images.size());
  return report;
}

}  // namespace latentdub
