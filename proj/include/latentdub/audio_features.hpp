#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "latentdub/core/nn.hpp"
#include "latentdub/core/tensor.hpp"

namespace latentdub {

// log-magnitude floor: ln(1e-10); also the padding value for audio windows
inline constexpr double kMelLogFloor = -23.025850929940457;
inline constexpr double kMelFloorEps = 1e-10;

struct MelConfig {
  int sample_rate = 16000;
  int n_fft = 400;   // 25 ms
  int hop = 160;     // 10 ms
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
};

struct MelSpectrogram {
  Tensor frames;  // [steps, 80]
  double hop_seconds = 0.01;
  int sample_rate_hz = 16000;

  int steps() const { return frames.ndim() == 2 ? frames.dim(0) : 0; }
  int channels() const { return frames.ndim() == 2 ? frames.dim(1) : 0; }
};

struct AudioWindow {
  Tensor mel_slice;  // [T * steps_per_segment, 80]
  int center_frame = 0;
  int segments = 1;                    // T, odd
  std::vector<std::uint8_t> pad_mask;  // 1 = padded step
};

struct AudioEmbedding {
  Tensor sequence;                     // [L, d]
  std::vector<std::uint8_t> key_mask;  // 1 = attendable position
  int dim() const { return sequence.ndim() == 2 ? sequence.dim(1) : 0; }
  int length() const { return sequence.ndim() == 2 ? sequence.dim(0) : 0; }
};

// src_rate == 16000 passes through bit-identically; otherwise windowed-sinc
std::vector<double> resample_to_16k(const std::vector<double>& waveform, double src_rate);

// center-padded STFT: steps = 1 + floor(samples / hop)
MelSpectrogram compute_mel(const std::vector<double>& waveform_16k,
                           const MelConfig& cfg = MelConfig{});

int steps_per_segment(const MelSpectrogram& mel, double fps);
int video_frame_count(const MelSpectrogram& mel, double fps);

// T segments centered at video frame t; out-of-range segments padded with the
// mel floor and flagged in pad_mask
AudioWindow window_segments(const MelSpectrogram& mel, int t, int segments, double fps);

class AudioEncoder {
 public:
  virtual ~AudioEncoder() = default;
  virtual int input_channels() const = 0;
  virtual int stride() const = 0;
  virtual int embed_dim() const = 0;
  virtual AudioEmbedding encode(const AudioWindow& window) const = 0;
};

struct ToyAudioEncoderConfig {
  int embed_dim = 32;
  int heads = 2;
  std::uint64_t seed = 1234;
  bool use_position_embeddings = true;
};

// Frozen, seeded stand-in for a pretrained speech encoder: two 1-d
// convolutions with GELU (the second one strided), sinusoidal position
// embeddings, two pre-norm transformer blocks, final layer norm.
class ToyAudioEncoder : public AudioEncoder {
 public:
  explicit ToyAudioEncoder(const ToyAudioEncoderConfig& cfg = ToyAudioEncoderConfig{});
  int input_channels() const override { return 80; }
  int stride() const override { return 2; }
  int embed_dim() const override { return cfg_.embed_dim; }
  AudioEmbedding encode(const AudioWindow& window) const override;
  const ToyAudioEncoderConfig& config() const { return cfg_; }

 private:
  ToyAudioEncoderConfig cfg_;
  nn::ParamRegistry params_;
  nn::Conv1d conv1_, conv2_;
  struct Block {
    nn::LayerNorm ln1, ln2;
    nn::Linear q, k, v, o, fc1, fc2;
  };
  std::vector<Block> blocks_;
  nn::LayerNorm final_ln_;
};

}  // namespace latentdub
