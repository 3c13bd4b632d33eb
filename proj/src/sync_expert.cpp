#include "latentdub/sync_expert.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "latentdub/core/checkpoint.hpp"

namespace latentdub {

SyncExpert::SyncExpert(const SyncExpertConfig& cfg) : cfg_(cfg) {
  if (cfg.clip_frames < 1 || cfg.clip_frames % 2 == 0)
    throw std::invalid_argument("SyncExpert: clip_frames must be odd (centered windows)");
  if (cfg.crop_size % 2 != 0) throw std::invalid_argument("SyncExpert: crop_size must be even");
  std::mt19937_64 rng(cfg.seed);
  a1_ = nn::Conv1d(params_, "a1", rng, 80, 32, 3, 1, 1);
  a2_ = nn::Conv1d(params_, "a2", rng, 32, 32, 3, 2, 1);
  a3_ = nn::Conv1d(params_, "a3", rng, 32, 32, 3, 2, 1);
  a_head_ = nn::Linear(params_, "a_head", rng, 32, cfg.embed_dim);
  const int vc = 3 * cfg.clip_frames;
  v1_ = nn::Conv2d(params_, "v1", rng, vc, 16, 3, 2, 1);
  v2_ = nn::Conv2d(params_, "v2", rng, 16, 32, 3, 2, 1);
  v3_ = nn::Conv2d(params_, "v3", rng, 32, 32, 3, 2, 1);
  v_head_ = nn::Linear(params_, "v_head", rng, 32, cfg.embed_dim);
  set_trainable(false);
}

void SyncExpert::set_trainable(bool trainable) {
  for (const auto& [name, v] : params_.items()) v->requires_grad = trainable;
}

ad::Var SyncExpert::audio_embedding(const AudioWindow& audio) const {
  if (audio.mel_slice.ndim() != 2 || audio.mel_slice.dim(1) != 80)
    throw std::invalid_argument("SyncExpert: audio window must be [steps, 80]");
  const int steps = audio.mel_slice.dim(0);
  Tensor norm({80, steps});
  const double shift = kMelLogFloor / 2.0, scale = 2.0 / (-kMelLogFloor);
  for (int s = 0; s < steps; ++s)
    for (int c = 0; c < 80; ++c) norm.at(c, s) = (audio.mel_slice.at(s, c) - shift) * scale;
  auto x = ad::gelu(a1_(ad::constant(std::move(norm))));
  x = ad::gelu(a2_(x));
  x = ad::gelu(a3_(x));
  auto pooled = ad::reshape(ad::global_avg_pool(ad::reshape(x, {32, 1, x->value.dim(1)})), {1, 32});
  return ad::l2_normalize_rows(a_head_(pooled));
}

ad::Var SyncExpert::visual_embedding(const std::vector<ad::Var>& clip) const {
  if (static_cast<int>(clip.size()) != cfg_.clip_frames)
    throw std::invalid_argument("SyncExpert: clip length mismatch");
  // base frame plus temporal differences of the lower halves: lip MOTION is
  // the sync-relevant signal; the static face would otherwise dominate the
  // pooled features and collapse the embeddings
  std::vector<ad::Var> lowers;
  for (const auto& frame : clip) {
    if (frame->value.ndim() != 3 || frame->value.dim(0) != 3)
      throw std::invalid_argument("SyncExpert: clip frames must be [3,H,W]");
    const int H = frame->value.dim(1);
    lowers.push_back(ad::slice_rows(frame, H / 2, H));
  }
  ad::Var stacked = lowers[0];
  for (size_t i = 1; i < lowers.size(); ++i)
    stacked = ad::concat_ch(stacked, ad::sub(lowers[i], lowers[i - 1]));
  auto x = ad::gelu(v1_(stacked));
  x = ad::gelu(v2_(x));
  x = ad::gelu(v3_(x));
  auto pooled = ad::reshape(ad::global_avg_pool(x), {1, 32});
  return ad::l2_normalize_rows(v_head_(pooled));
}

ad::Var SyncExpert::p_sync_var(const AudioWindow& audio,
                               const std::vector<ad::Var>& clip_chw) const {
  auto a = audio_embedding(audio);
  auto v = visual_embedding(clip_chw);
  auto cos = ad::sum_all(ad::mul(a, v));  // both unit-normalized
  return ad::clamp(ad::scale(ad::add_scalar(cos, 1.0), 0.5), kLogEps, 1.0);
}

double SyncExpert::sync_probability(const AudioWindow& audio,
                                    const std::vector<Image>& clip) const {
  if (static_cast<int>(clip.size()) != cfg_.clip_frames)
    throw std::invalid_argument("sync_probability: clip length mismatch");
  std::vector<ad::Var> vars;
  vars.reserve(clip.size());
  for (const auto& img : clip) vars.push_back(ad::constant(image_to_tensor(img)));
  return p_sync_var(audio, vars)->value[0];
}

void SyncExpert::save(const std::string& path) const {
  nlohmann::json cfg;
  cfg["clip_frames"] = cfg_.clip_frames;
  cfg["embed_dim"] = cfg_.embed_dim;
  cfg["crop_size"] = cfg_.crop_size;
  cfg["seed"] = cfg_.seed;
  save_checkpoint(path, "sync-expert", cfg, params_);
}

std::unique_ptr<SyncExpert> SyncExpert::load(const std::string& path) {
  auto manifest = read_checkpoint_manifest(path);
  const auto& c = manifest.at("config");
  SyncExpertConfig cfg;
  cfg.clip_frames = c.at("clip_frames").get<int>();
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.crop_size = c.at("crop_size").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  auto expert = std::make_unique<SyncExpert>(cfg);
  load_checkpoint(path, "sync-expert", expert->params());
  expert->set_trainable(false);
  return expert;
}

namespace {

AudioWindow expert_window(const SyncClip& clip, int start, int n_frames) {
  const int center = start + (n_frames - 1) / 2;
  return window_segments(clip.mel, center, n_frames, clip.fps);
}

SyncPair make_pair(const SyncClip& clip, int visual_start, int audio_offset, int n_frames) {
  SyncPair pair;
  pair.offset = audio_offset;
  pair.window = expert_window(clip, visual_start + audio_offset, n_frames);
  pair.clip.assign(clip.crops.begin() + visual_start,
                   clip.crops.begin() + visual_start + n_frames);
  return pair;
}

SyncBatch sample_batch_impl(const std::vector<const SyncClip*>& pool, const std::string& label,
                            int size, int min_offset, std::uint64_t rng_seed, int n_frames) {
  if (size < 2 || size % 2 != 0)
    throw std::invalid_argument("sample_sync_batch: size must be even and >= 2");
  if (min_offset < 1) throw std::invalid_argument("sample_sync_batch: min_offset must be >= 1");
  bool enough = false;
  for (const auto* c : pool)
    if (static_cast<int>(c->crops.size()) >= n_frames + min_offset) enough = true;
  if (!enough)
    throw std::invalid_argument("sample_sync_batch: insufficient footage for " + label);

  std::mt19937_64 rng(rng_seed);
  SyncBatch batch;
  batch.identity_id = label;
  auto pick_clip = [&]() -> const SyncClip* {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const SyncClip* c = pool[rng() % pool.size()];
      if (static_cast<int>(c->crops.size()) >= n_frames + min_offset) return c;
    }
    throw std::invalid_argument("sample_sync_batch: no usable clip");
  };

  const int half = size / 2;
  for (int i = 0; i < half; ++i) {
    const SyncClip* c = pick_clip();
    const int max_start = static_cast<int>(c->crops.size()) - n_frames;
    int s = static_cast<int>(rng() % static_cast<std::uint64_t>(max_start + 1));
    batch.positives.push_back(make_pair(*c, s, 0, n_frames));
  }
  for (int i = 0; i < half; ++i) {
    const SyncClip* c = pick_clip();
    const int frames = static_cast<int>(c->crops.size());
    const int max_start = frames - n_frames;
    const int h = (n_frames - 1) / 2;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000)
        throw std::invalid_argument("sample_sync_batch: cannot place a negative offset");
      int s = static_cast<int>(rng() % static_cast<std::uint64_t>(max_start + 1));
      // audio window center must stay inside the clip
      int lo = -(s + h), hi = frames - 1 - s - h;
      std::vector<int> options;
      for (int o = lo; o <= hi; ++o)
        if (std::abs(o) >= min_offset) options.push_back(o);
      if (options.empty()) continue;
      int o = options[rng() % options.size()];
      batch.negatives.push_back(make_pair(*c, s, o, n_frames));
      break;
    }
  }
  return batch;
}

}  // namespace

SyncBatch sample_sync_batch(const std::vector<SyncClip>& clips, const std::string& identity,
                            int size, int min_offset, std::uint64_t rng_seed, int clip_frames) {
  std::vector<const SyncClip*> pool;
  for (const auto& c : clips)
    if (c.identity == identity) pool.push_back(&c);
  if (pool.empty()) throw std::invalid_argument("sample_sync_batch: unknown identity " + identity);
  return sample_batch_impl(pool, identity, size, min_offset, rng_seed, clip_frames);
}

SyncBatch sample_mixed_sync_batch(const std::vector<SyncClip>& clips, int size, int min_offset,
                                  std::uint64_t rng_seed, int clip_frames) {
  std::vector<const SyncClip*> pool;
  for (const auto& c : clips) pool.push_back(&c);
  if (pool.empty()) throw std::invalid_argument("sample_mixed_sync_batch: no clips");
  return sample_batch_impl(pool, "mixed", size, min_offset, rng_seed, clip_frames);
}

SyncTrainReport train_sync_expert(SyncExpert& expert, const std::vector<SyncClip>& clips,
                                  const SyncTrainConfig& cfg) {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.identity);
  if (ids.empty()) throw std::invalid_argument("train_sync_expert: empty dataset");
  std::vector<std::string> identities(ids.begin(), ids.end());

  expert.set_trainable(true);
  nn::Adam opt(expert.params().vars(), cfg.lr);
  SyncTrainReport report;
  report.loss_curve.reserve(static_cast<size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    const std::uint64_t batch_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(step);
    SyncBatch batch =
        cfg.mixed_identity_batches
            ? sample_mixed_sync_batch(clips, cfg.batch_size, cfg.min_offset, batch_seed,
                                      expert.clip_frames())
            : sample_sync_batch(clips, identities[step % identities.size()], cfg.batch_size,
                                cfg.min_offset, batch_seed, expert.clip_frames());
    opt.zero_grad();
    ad::Var loss;
    auto bce = [&](const SyncPair& pair, bool positive) {
      std::vector<ad::Var> clip_vars;
      for (const auto& img : pair.clip) clip_vars.push_back(ad::constant(image_to_tensor(img)));
      auto p = ad::clamp(expert.p_sync_var(pair.window, clip_vars), kLogEps, 1.0 - kLogEps);
      auto term = positive ? ad::neg(ad::log(p))
                           : ad::neg(ad::log(ad::add_scalar(ad::neg(p), 1.0)));
      loss = loss ? ad::add(loss, term) : term;
    };
    for (const auto& pair : batch.positives) bce(pair, true);
    for (const auto& pair : batch.negatives) bce(pair, false);
    loss = ad::scale(loss, 1.0 / (batch.positives.size() + batch.negatives.size()));
    if (!loss->value.all_finite())
      throw TrainingError("train_sync_expert: non-finite loss at step " + std::to_string(step));
    ad::backward(loss);
    opt.step();
    report.loss_curve.push_back(loss->value[0]);
  }
  expert.set_trainable(false);
  return report;
}

double sync_separation(const SyncExpert& expert, const std::vector<SyncClip>& clips,
                       int n_pairs, int min_offset, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.identity);
  std::vector<std::string> identities(ids.begin(), ids.end());
  double pos = 0.0, neg = 0.0;
  int count = 0;
  for (int i = 0; i < n_pairs; ++i) {
    auto batch = sample_sync_batch(clips, identities[static_cast<size_t>(i) % identities.size()], 2, min_offset,
                                   seed + static_cast<std::uint64_t>(i) * 7919ULL, expert.clip_frames());
    pos += expert.sync_probability(batch.positives[0].window, batch.positives[0].clip);
    neg += expert.sync_probability(batch.negatives[0].window, batch.negatives[0].clip);
    ++count;
  }
  return (pos - neg) / count;
}

double lse_c(const SyncScorer& scorer, const std::vector<Image>& frames,
             const MelSpectrogram& mel, double fps) {
  const int n = scorer.clip_frames();
  if (static_cast<int>(frames.size()) < n)
    throw std::invalid_argument("lse_c: clip shorter than the expert window");
  const int usable = std::min<int>(static_cast<int>(frames.size()), video_frame_count(mel, fps));
  if (usable < n) throw std::invalid_argument("lse_c: audio shorter than the expert window");
  double acc = 0.0;
  int count = 0;
  for (int s = 0; s + n <= usable; ++s) {
    std::vector<ad::Var> clip;
    for (int i = 0; i < n; ++i)
      clip.push_back(ad::constant(image_to_tensor(frames[static_cast<size_t>(s + i)])));
    auto window = window_segments(mel, s + (n - 1) / 2, n, fps);
    acc += scorer.p_sync_var(window, clip)->value[0];
    ++count;
  }
  return acc / count;
}

}  // namespace latentdub
