#include "latentdub/audio_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace latentdub {

namespace {

constexpr double kPi = std::numbers::pi;

// iterative radix-2 FFT, in place
void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::logic_error("fft: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / static_cast<double>(len);
    std::complex<double> wn(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wn;
      }
    }
  }
}

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// triangular mel filterbank rows over the one-sided spectrum
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg, int n_bins) {
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels) + 2);
  for (size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        (cfg.n_mels + 1));
  std::vector<std::vector<double>> fb(static_cast<size_t>(cfg.n_mels),
                                      std::vector<double>(static_cast<size_t>(n_bins), 0.0));
  const double bin_hz = static_cast<double>(cfg.sample_rate) / (2.0 * (n_bins - 1));
  for (int m = 0; m < cfg.n_mels; ++m) {
    double f0 = centers[m], f1 = centers[m + 1], f2 = centers[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      double f = b * bin_hz;
      if (f > f0 && f < f2) {
        double w = f <= f1 ? (f - f0) / (f1 - f0) : (f2 - f) / (f2 - f1);
        fb[m][b] = w;
      }
    }
  }
  return fb;
}

}  // namespace

std::vector<double> resample_to_16k(const std::vector<double>& waveform, double src_rate) {
  if (waveform.empty()) throw std::invalid_argument("resample_to_16k: empty waveform");
  if (!(src_rate > 0.0)) throw std::invalid_argument("resample_to_16k: src_rate must be > 0");
  for (double s : waveform)
    if (!std::isfinite(s)) throw std::invalid_argument("resample_to_16k: non-finite sample");
  if (src_rate == 16000.0) return waveform;

  const double ratio = 16000.0 / src_rate;
  const auto out_len =
      static_cast<size_t>(std::llround(static_cast<double>(waveform.size()) * ratio));
  // windowed sinc, cutoff at the lower Nyquist
  const double fc = std::min(1.0, ratio);
  const int half = 32;
  std::vector<double> out(out_len, 0.0);
  const auto n_in = static_cast<std::int64_t>(waveform.size());
  for (size_t i = 0; i < out_len; ++i) {
    const double t = static_cast<double>(i) / ratio;  // position in source samples
    const auto j0 = static_cast<std::int64_t>(std::floor(t)) - half + 1;
    const auto j1 = static_cast<std::int64_t>(std::floor(t)) + half;
    double acc = 0.0;
    for (std::int64_t j = std::max<std::int64_t>(0, j0); j <= std::min(n_in - 1, j1); ++j) {
      double u = t - static_cast<double>(j);
      double sinc = u == 0.0 ? 1.0 : std::sin(kPi * fc * u) / (kPi * fc * u);
      double win = 0.5 + 0.5 * std::cos(kPi * u / half);  // Hann taper over the tap span
      acc += waveform[static_cast<size_t>(j)] * fc * sinc * win;
    }
    out[i] = acc;
  }
  return out;
}

MelSpectrogram compute_mel(const std::vector<double>& waveform_16k, const MelConfig& cfg) {
  if (waveform_16k.empty()) throw std::invalid_argument("compute_mel: empty waveform");
  for (double s : waveform_16k)
    if (!std::isfinite(s)) throw std::invalid_argument("compute_mel: non-finite sample");
  if (cfg.n_mels != 80) throw std::invalid_argument("compute_mel: mel channels fixed at 80");

  const int steps = 1 + static_cast<int>(waveform_16k.size() / static_cast<size_t>(cfg.hop));
  const size_t fft_n = next_pow2(static_cast<size_t>(cfg.n_fft));
  const int n_bins = static_cast<int>(fft_n / 2 + 1);
  const auto fb = mel_filterbank(cfg, n_bins);

  std::vector<double> hann(static_cast<size_t>(cfg.n_fft));
  for (int i = 0; i < cfg.n_fft; ++i)
    hann[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.n_fft);

  Tensor out({steps, cfg.n_mels});
  const auto n_in = static_cast<std::int64_t>(waveform_16k.size());
  std::vector<std::complex<double>> buf(fft_n);
  std::vector<double> power(static_cast<size_t>(n_bins));
  for (int s = 0; s < steps; ++s) {
    // centered frame: sample window [s*hop - n_fft/2, s*hop + n_fft/2)
    const std::int64_t start = static_cast<std::int64_t>(s) * cfg.hop - cfg.n_fft / 2;
    for (size_t i = 0; i < fft_n; ++i) buf[i] = 0.0;
    for (int i = 0; i < cfg.n_fft; ++i) {
      std::int64_t idx = start + i;
      double v = (idx >= 0 && idx < n_in) ? waveform_16k[static_cast<size_t>(idx)] : 0.0;
      buf[static_cast<size_t>(i)] = v * hann[static_cast<size_t>(i)];
    }
    fft_radix2(buf);
    for (int b = 0; b < n_bins; ++b) power[static_cast<size_t>(b)] = std::norm(buf[static_cast<size_t>(b)]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (int b = 0; b < n_bins; ++b) acc += fb[static_cast<size_t>(m)][static_cast<size_t>(b)] * power[static_cast<size_t>(b)];
      out.at(s, m) = std::log(std::max(acc, kMelFloorEps));
    }
  }
  MelSpectrogram mel;
  mel.frames = std::move(out);
  mel.hop_seconds = static_cast<double>(cfg.hop) / cfg.sample_rate;
  mel.sample_rate_hz = cfg.sample_rate;
  return mel;
}

int steps_per_segment(const MelSpectrogram& mel, double fps) {
  if (!(fps > 0.0)) throw std::invalid_argument("steps_per_segment: fps must be > 0");
  double exact = 1.0 / (fps * mel.hop_seconds);
  int sps = static_cast<int>(std::lround(exact));
  if (sps < 1 || std::fabs(exact - sps) > 1e-6)
    throw std::invalid_argument("steps_per_segment: frame duration must be a whole number of mel steps");
  return sps;
}

int video_frame_count(const MelSpectrogram& mel, double fps) {
  return mel.steps() / steps_per_segment(mel, fps);
}

AudioWindow window_segments(const MelSpectrogram& mel, int t, int segments, double fps) {
  if (segments < 1 || segments % 2 == 0)
    throw std::invalid_argument("window_segments: T must be odd and >= 1");
  const int sps = steps_per_segment(mel, fps);
  const int nframes = mel.steps() / sps;
  if (t < 0 || t >= nframes) throw std::invalid_argument("window_segments: t out of video range");
  const int half = (segments - 1) / 2;
  const int ch = mel.channels();

  AudioWindow w;
  w.center_frame = t;
  w.segments = segments;
  w.mel_slice = Tensor({segments * sps, ch});
  w.pad_mask.assign(static_cast<size_t>(segments) * sps, 0);
  int row = 0;
  for (int u = t - half; u <= t + half; ++u) {
    for (int s = 0; s < sps; ++s, ++row) {
      if (u < 0 || u >= nframes) {
        for (int c = 0; c < ch; ++c) w.mel_slice.at(row, c) = kMelLogFloor;
        w.pad_mask[static_cast<size_t>(row)] = 1;
      } else {
        const int src = u * sps + s;
        for (int c = 0; c < ch; ++c) w.mel_slice.at(row, c) = mel.frames.at(src, c);
      }
    }
  }
  return w;
}

ToyAudioEncoder::ToyAudioEncoder(const ToyAudioEncoderConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.seed);
  const int d = cfg.embed_dim;
  if (d % cfg.heads != 0)
    throw std::invalid_argument("ToyAudioEncoder: embed_dim must divide heads");
  conv1_ = nn::Conv1d(params_, "conv1", rng, 80, d, 3, 1, 1);
  conv2_ = nn::Conv1d(params_, "conv2", rng, d, d, 3, 2, 1);
  blocks_.resize(2);
  for (int b = 0; b < 2; ++b) {
    auto pre = "block" + std::to_string(b);
    blocks_[b].ln1 = nn::LayerNorm(params_, pre + ".ln1", d);
    blocks_[b].q = nn::Linear(params_, pre + ".q", rng, d, d);
    blocks_[b].k = nn::Linear(params_, pre + ".k", rng, d, d);
    blocks_[b].v = nn::Linear(params_, pre + ".v", rng, d, d);
    blocks_[b].o = nn::Linear(params_, pre + ".o", rng, d, d);
    blocks_[b].ln2 = nn::LayerNorm(params_, pre + ".ln2", d);
    blocks_[b].fc1 = nn::Linear(params_, pre + ".fc1", rng, d, 4 * d);
    blocks_[b].fc2 = nn::Linear(params_, pre + ".fc2", rng, 4 * d, d);
  }
  final_ln_ = nn::LayerNorm(params_, "final_ln", d);
  // frozen extractor
  for (const auto& [name, v] : params_.items()) v->requires_grad = false;
}

AudioEmbedding ToyAudioEncoder::encode(const AudioWindow& window) const {
  if (window.mel_slice.ndim() != 2 || window.mel_slice.dim(1) != input_channels())
    throw std::invalid_argument("ToyAudioEncoder: window channel mismatch");
  const int steps = window.mel_slice.dim(0);
  const int d = cfg_.embed_dim;

  // normalize so the mel floor maps to -1 and 0 dB to +1
  Tensor norm({80, steps});
  const double shift = kMelLogFloor / 2.0, scale = 2.0 / (-kMelLogFloor);
  for (int s = 0; s < steps; ++s)
    for (int c = 0; c < 80; ++c) norm.at(c, s) = (window.mel_slice.at(s, c) - shift) * scale;

  auto x = ad::gelu(conv1_(ad::constant(std::move(norm))));
  x = ad::gelu(conv2_(x));  // [d, L]
  const int L = x->value.dim(1);
  auto tokens = ad::transpose(x);  // [L, d]

  if (cfg_.use_position_embeddings) {
    Tensor pos({L, d});
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < d / 2; ++j) {
        double freq = std::pow(10000.0, -2.0 * j / d);
        pos.at(i, 2 * j) = std::sin(i * freq);
        pos.at(i, 2 * j + 1) = std::cos(i * freq);
      }
    tokens = ad::add(tokens, ad::constant(std::move(pos)));
  }

  const int dh = d / cfg_.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& blk : blocks_) {
    auto normed = blk.ln1(tokens);
    auto q = blk.q(normed), k = blk.k(normed), v = blk.v(normed);
    std::vector<ad::Var> heads;
    for (int h = 0; h < cfg_.heads; ++h) {
      auto qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
      auto attn = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh));
      heads.push_back(ad::matmul(attn, vh));
    }
    tokens = ad::add(tokens, blk.o(cfg_.heads == 1 ? heads[0] : ad::concat_cols(heads)));
    auto mlp = blk.fc2(ad::gelu(blk.fc1(blk.ln2(tokens))));
    tokens = ad::add(tokens, mlp);
  }
  tokens = final_ln_(tokens);

  AudioEmbedding emb;
  emb.sequence = tokens->value;
  // an output position is attendable unless every input step it covers is padding
  emb.key_mask.assign(static_cast<size_t>(L), 0);
  for (int i = 0; i < L; ++i) {
    bool any_valid = false;
    for (int s = 2 * i - 1; s <= 2 * i + 1; ++s)
      if (s >= 0 && s < steps && !window.pad_mask[static_cast<size_t>(s)]) any_valid = true;
    emb.key_mask[static_cast<size_t>(i)] = any_valid ? 1 : 0;
  }
  return emb;
}

}  // namespace latentdub
