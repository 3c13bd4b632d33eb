#pragma once

#include <memory>
#include <string>
#include <vector>

#include "latentdub/audio_features.hpp"
#include "latentdub/core/nn.hpp"

namespace latentdub {

enum class FusionLevels { first_only, first_two, all, custom };

FusionLevels fusion_levels_from_string(const std::string& s);
std::string to_string(FusionLevels f);

struct FusionSite {
  int level = 0;
  std::string path;  // "down" or "up"
  bool enabled = false;
};

struct GeneratorConfig {
  int base_channels = 32;
  int depth = 3;  // resolution levels
  FusionLevels fusion = FusionLevels::all;
  // per-site enable mask, length 2*depth, ordered [down 0..D-1, up D-1..0];
  // derived from `fusion` unless fusion == custom
  std::vector<std::uint8_t> site_mask;
  int audio_dim = 32;
  int attention_heads = 2;
  int latent_channels = 4;  // c; generator input is 2c, output c
  bool self_attention = false;  // reserved, must stay false
  std::uint64_t seed = 2024;

  std::vector<std::uint8_t> resolved_site_mask() const;
  void validate() const;
};

// Latent-space U-Net: encoder halves the spatial dims per level, the decoder
// mirrors them with skip connections, and cross-attention against the audio
// sequence is inserted at the enabled sites. Single forward pass, no timestep
// input, no iterative refinement.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg);

  // cond [2c,h,w] with h,w divisible by 2^(depth-1); audio_seq [L, audio_dim]
  ad::Var generate(const ad::Var& cond, const ad::Var& audio_seq,
                   const std::vector<std::uint8_t>* key_mask) const;
  Tensor generate(const Tensor& cond, const AudioEmbedding& audio) const;

  std::vector<FusionSite> fusion_site_report() const;
  const GeneratorConfig& config() const { return cfg_; }
  std::int64_t parameter_count() const { return params_.parameter_count(); }
  std::uint64_t parameter_checksum() const { return params_.checksum(); }
  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }
  void set_all_parameters_zero() { params_.set_all_zero(); }  // testing hook
  void set_trainable(bool trainable);

  void save(const std::string& path) const;
  static std::unique_ptr<Generator> load(const std::string& path);

 private:
  struct Block {
    nn::Conv2d c1, c2;
  };
  ad::Var run_block(const Block& b, const ad::Var& x) const;
  ad::Var attend(int site_index, const nn::CrossAttention& attn, const ad::Var& x,
                 const ad::Var& audio, const std::vector<std::uint8_t>* key_mask) const;

  GeneratorConfig cfg_;
  std::vector<std::uint8_t> mask_;
  nn::ParamRegistry params_;
  nn::Conv2d stem_;
  std::vector<Block> down_blocks_;
  std::vector<nn::CrossAttention> down_attn_;
  std::vector<nn::Conv2d> downsample_;
  Block mid_block_;
  std::vector<nn::CrossAttention> up_attn_;  // indexed by level
  std::vector<nn::Conv2d> upsample_;
  std::vector<Block> up_blocks_;
  nn::Conv2d head_;
};

}  // namespace latentdub
