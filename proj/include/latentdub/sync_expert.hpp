#pragma once

#include <memory>
#include <string>
#include <vector>

#include "latentdub/audio_features.hpp"
#include "latentdub/core/image.hpp"
#include "latentdub/losses.hpp"

namespace latentdub {

// one clip's worth of sync-expert material
struct SyncClip {
  std::string identity;
  std::vector<Image> crops;  // per-frame face crops
  MelSpectrogram mel;
  double fps = 25.0;
};

struct SyncPair {
  AudioWindow window;
  std::vector<Image> clip;  // N consecutive crops
  int offset = 0;           // audio offset in frames; 0 for positives
};

struct SyncBatch {
  std::string identity_id;
  std::vector<SyncPair> positives;
  std::vector<SyncPair> negatives;
};

struct SyncExpertConfig {
  int clip_frames = 5;  // N, odd (window extraction is centered)
  int embed_dim = 16;
  int crop_size = 64;
  std::uint64_t seed = 97;
};

// Two-tower audio/visual scorer. Both towers emit unit-normalized embeddings;
// P_sync = clamp((1 + cos)/2, eps, 1). The visual tower sees the lower half
// of each of the N frames.
class SyncExpert : public SyncScorer {
 public:
  explicit SyncExpert(const SyncExpertConfig& cfg = SyncExpertConfig{});

  int clip_frames() const override { return cfg_.clip_frames; }
  ad::Var p_sync_var(const AudioWindow& audio,
                     const std::vector<ad::Var>& clip_chw) const override;
  double sync_probability(const AudioWindow& audio, const std::vector<Image>& clip) const;

  ad::Var audio_embedding(const AudioWindow& audio) const;            // [1, embed_dim]
  ad::Var visual_embedding(const std::vector<ad::Var>& clip) const;   // [1, embed_dim]

  const SyncExpertConfig& config() const { return cfg_; }
  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }
  void set_trainable(bool trainable);
  void save(const std::string& path) const;
  static std::unique_ptr<SyncExpert> load(const std::string& path);

 private:
  SyncExpertConfig cfg_;
  nn::ParamRegistry params_;
  nn::Conv1d a1_, a2_, a3_;
  nn::Linear a_head_;
  nn::Conv2d v1_, v2_, v3_;
  nn::Linear v_head_;
};

// Single-identity batch sampler: every entry in the batch comes from the
// requested identity; negatives use a temporal audio offset >= min_offset.
SyncBatch sample_sync_batch(const std::vector<SyncClip>& clips, const std::string& identity,
                            int size, int min_offset, std::uint64_t rng_seed,
                            int clip_frames = 5);

// Baseline sampler without the single-identity constraint (the behavior the
// single-identity fix replaces); used by the anti-leakage comparison.
SyncBatch sample_mixed_sync_batch(const std::vector<SyncClip>& clips, int size, int min_offset,
                                  std::uint64_t rng_seed, int clip_frames = 5);

struct SyncTrainConfig {
  int steps = 300;
  int batch_size = 12;  // pairs per step (half positive, half negative)
  double lr = 1e-3;
  int min_offset = 10;
  std::uint64_t seed = 11;
  bool mixed_identity_batches = false;  // baseline mode for the ablation
  SyncExpertConfig expert;
};

struct SyncTrainReport {
  std::vector<double> loss_curve;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SyncTrainReport train_sync_expert(SyncExpert& expert, const std::vector<SyncClip>& clips,
                                  const SyncTrainConfig& cfg);

// mean P_sync(aligned) - mean P_sync(offset) over sampled pairs
double sync_separation(const SyncExpert& expert, const std::vector<SyncClip>& clips,
                       int n_pairs, int min_offset, std::uint64_t seed);

// mean sync confidence over all sliding N-frame windows
double lse_c(const SyncScorer& scorer, const std::vector<Image>& frames,
             const MelSpectrogram& mel, double fps);

}  // namespace latentdub
