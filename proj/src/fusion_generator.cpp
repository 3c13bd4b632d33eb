#include "latentdub/fusion_generator.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <stdexcept>

#include "latentdub/core/checkpoint.hpp"

namespace latentdub {

FusionLevels fusion_levels_from_string(const std::string& s) {
  if (s == "first_only") return FusionLevels::first_only;
  if (s == "first_two") return FusionLevels::first_two;
  if (s == "all") return FusionLevels::all;
  if (s == "custom") return FusionLevels::custom;
  throw std::invalid_argument("unknown fusion_levels: " + s);
}

std::string to_string(FusionLevels f) {
  switch (f) {
    case FusionLevels::first_only: return "first_only";
    case FusionLevels::first_two: return "first_two";
    case FusionLevels::all: return "all";
    case FusionLevels::custom: return "custom";
  }
  return "?";
}

std::vector<std::uint8_t> GeneratorConfig::resolved_site_mask() const {
  const size_t n_sites = static_cast<size_t>(2 * depth);
  if (fusion == FusionLevels::custom) {
    if (site_mask.size() != n_sites)
      throw std::invalid_argument("GeneratorConfig: custom site_mask must have 2*depth entries");
    return site_mask;
  }
  int enabled_levels = fusion == FusionLevels::first_only ? 1
                       : fusion == FusionLevels::first_two ? 2
                                                           : depth;
  std::vector<std::uint8_t> mask(n_sites, 0);
  for (int i = 0; i < depth; ++i) {
    bool on = i < enabled_levels;
    mask[static_cast<size_t>(i)] = on ? 1 : 0;                          // down, level i
    mask[static_cast<size_t>(depth + (depth - 1 - i))] = on ? 1 : 0;    // up, level i
  }
  return mask;
}

void GeneratorConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("GeneratorConfig: depth must be >= 2");
  if (base_channels < attention_heads || base_channels % attention_heads != 0)
    throw std::invalid_argument("GeneratorConfig: heads must divide base_channels");
  if (audio_dim < 1 || latent_channels < 1 || base_channels < 1)
    throw std::invalid_argument("GeneratorConfig: dims must be positive");
  if (self_attention)
    throw std::invalid_argument("GeneratorConfig: self_attention is reserved and unsupported");
  auto mask = resolved_site_mask();
  bool any = false;
  for (auto m : mask) any = any || m;
  if (!any && fusion != FusionLevels::custom)
    throw std::invalid_argument("GeneratorConfig: at least one fusion level must be enabled");
}

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg), mask_(cfg.resolved_site_mask()) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const int D = cfg_.depth;
  auto ch = [&](int level) { return cfg_.base_channels << level; };

  stem_ = nn::Conv2d(params_, "stem", rng, 2 * cfg_.latent_channels, ch(0), 3, 1, 1);
  down_blocks_.resize(static_cast<size_t>(D));
  down_attn_.reserve(static_cast<size_t>(D));
  downsample_.resize(static_cast<size_t>(D - 1));
  for (int i = 0; i < D; ++i) {
    auto pre = "down" + std::to_string(i);
    down_blocks_[static_cast<size_t>(i)].c1 = nn::Conv2d(params_, pre + ".c1", rng, ch(i), ch(i), 3, 1, 1);
    down_blocks_[static_cast<size_t>(i)].c2 = nn::Conv2d(params_, pre + ".c2", rng, ch(i), ch(i), 3, 1, 1);
    down_attn_.emplace_back(params_, pre + ".attn", rng, ch(i), cfg_.audio_dim,
                            cfg_.attention_heads);
    if (i < D - 1)
      downsample_[static_cast<size_t>(i)] = nn::Conv2d(params_, pre + ".down", rng, ch(i), ch(i + 1), 3, 2, 1);
  }
  mid_block_.c1 = nn::Conv2d(params_, "mid.c1", rng, ch(D - 1), ch(D - 1), 3, 1, 1);
  mid_block_.c2 = nn::Conv2d(params_, "mid.c2", rng, ch(D - 1), ch(D - 1), 3, 1, 1);

  up_attn_.reserve(static_cast<size_t>(D));
  upsample_.resize(static_cast<size_t>(D - 1));
  up_blocks_.resize(static_cast<size_t>(D - 1));
  for (int i = 0; i < D; ++i)
    up_attn_.emplace_back(params_, "up" + std::to_string(i) + ".attn", rng, ch(i),
                          cfg_.audio_dim, cfg_.attention_heads);
  for (int i = D - 2; i >= 0; --i) {
    auto pre = "up" + std::to_string(i);
    upsample_[static_cast<size_t>(i)] = nn::Conv2d(params_, pre + ".up", rng, ch(i + 1), ch(i), 3, 1, 1);
    up_blocks_[static_cast<size_t>(i)].c1 = nn::Conv2d(params_, pre + ".c1", rng, 2 * ch(i), ch(i), 3, 1, 1);
    up_blocks_[static_cast<size_t>(i)].c2 = nn::Conv2d(params_, pre + ".c2", rng, ch(i), ch(i), 3, 1, 1);
  }
  head_ = nn::Conv2d(params_, "head", rng, ch(0), cfg_.latent_channels, 3, 1, 1);
}

void Generator::set_trainable(bool trainable) {
  for (const auto& [name, v] : params_.items()) v->requires_grad = trainable;
}

ad::Var Generator::run_block(const Block& b, const ad::Var& x) const {
  return ad::gelu(b.c2(ad::gelu(b.c1(x))));
}

ad::Var Generator::attend(int site_index, const nn::CrossAttention& attn, const ad::Var& x,
                          const ad::Var& audio, const std::vector<std::uint8_t>* key_mask) const {
  if (!mask_[static_cast<size_t>(site_index)]) return x;
  const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
  auto tokens = ad::transpose(ad::reshape(x, {C, H * W}));  // [HW, C]
  auto fused = attn(tokens, audio, key_mask);
  return ad::reshape(ad::transpose(fused), {C, H, W});
}

ad::Var Generator::generate(const ad::Var& cond, const ad::Var& audio_seq,
                            const std::vector<std::uint8_t>* key_mask) const {
  if (cond->value.ndim() != 3 || cond->value.dim(0) != 2 * cfg_.latent_channels)
    throw std::invalid_argument("generate: cond must be [2c,h,w]");
  const int D = cfg_.depth;
  const int div = 1 << (D - 1);
  if (cond->value.dim(1) % div != 0 || cond->value.dim(2) % div != 0)
    throw std::invalid_argument("generate: spatial dims must be divisible by 2^(depth-1)");
  if (audio_seq->value.ndim() != 2 || audio_seq->value.dim(1) != cfg_.audio_dim)
    throw std::invalid_argument("generate: audio dim mismatch");

  auto x = stem_(cond);
  std::vector<ad::Var> skips(static_cast<size_t>(D - 1));
  for (int i = 0; i < D; ++i) {
    x = run_block(down_blocks_[static_cast<size_t>(i)], x);
    x = attend(i, down_attn_[static_cast<size_t>(i)], x, audio_seq, key_mask);
    if (i < D - 1) {
      skips[static_cast<size_t>(i)] = x;
      x = ad::gelu(downsample_[static_cast<size_t>(i)](x));
    }
  }
  x = run_block(mid_block_, x);
  x = attend(D + 0, up_attn_[static_cast<size_t>(D - 1)], x, audio_seq, key_mask);
  for (int i = D - 2; i >= 0; --i) {
    x = ad::gelu(upsample_[static_cast<size_t>(i)](ad::upsample2x(x)));
    x = ad::concat_ch(x, skips[static_cast<size_t>(i)]);
    x = run_block(up_blocks_[static_cast<size_t>(i)], x);
    x = attend(D + (D - 1 - i), up_attn_[static_cast<size_t>(i)], x, audio_seq, key_mask);
  }
  return head_(x);
}

Tensor Generator::generate(const Tensor& cond, const AudioEmbedding& audio) const {
  auto out = generate(ad::constant(cond), ad::constant(audio.sequence), &audio.key_mask);
  return out->value;
}

std::vector<FusionSite> Generator::fusion_site_report() const {
  std::vector<FusionSite> sites;
  const int D = cfg_.depth;
  for (int i = 0; i < D; ++i) sites.push_back({i, "down", mask_[static_cast<size_t>(i)] != 0});
  for (int i = D - 1; i >= 0; --i)
    sites.push_back({i, "up", mask_[static_cast<size_t>(D + (D - 1 - i))] != 0});
  return sites;
}

void Generator::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["base_channels"] = cfg_.base_channels;
  cfg["depth"] = cfg_.depth;
  cfg["fusion"] = to_string(cfg_.fusion);
  cfg["site_mask"] = mask_;
  cfg["audio_dim"] = cfg_.audio_dim;
  cfg["attention_heads"] = cfg_.attention_heads;
  cfg["latent_channels"] = cfg_.latent_channels;
  cfg["seed"] = cfg_.seed;
  save_checkpoint(path, "generator", cfg, params_);
}

std::unique_ptr<Generator> Generator::load(const std::string& path) {
  auto manifest = read_checkpoint_manifest(path);
  const auto& c = manifest.at("config");
  GeneratorConfig cfg;
  cfg.base_channels = c.at("base_channels").get<int>();
  cfg.depth = c.at("depth").get<int>();
  cfg.fusion = fusion_levels_from_string(c.at("fusion").get<std::string>());
  cfg.site_mask = c.at("site_mask").get<std::vector<std::uint8_t>>();
  if (cfg.fusion != FusionLevels::custom) cfg.site_mask.clear();
  cfg.audio_dim = c.at("audio_dim").get<int>();
  cfg.attention_heads = c.at("attention_heads").get<int>();
  cfg.latent_channels = c.at("latent_channels").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  auto g = std::make_unique<Generator>(cfg);
  load_checkpoint(path, "generator", g->params());
  return g;
}

}  // namespace latentdub
