#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentdub/core/image.hpp"
#include "latentdub/core/tensor.hpp"

namespace latentdub::io {

// --- frames: binary PPM (P6), 8-bit, lossless ---
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// --- audio: 16-bit PCM WAV, mono ---
void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);
std::vector<double> read_wav(const std::string& path, int* sample_rate_out);

// --- mel cache ---
// Byte layout (integers and floats little-endian):
//   [0..7]   magic "LDMELV01"
//   [8..11]  u32 dtype tag (1 = float64)
//   [12..15] u32 rows (time steps)
//   [16..19] u32 cols (mel channels)
//   [20..27] f64 hop_seconds
//   [28..31] u32 sample_rate_hz
//   [32..]   rows*cols float64, row-major
void write_mel_cache(const std::string& path, const Tensor& frames, double hop_seconds,
                     int sample_rate_hz);
Tensor read_mel_cache(const std::string& path, double* hop_seconds_out, int* sample_rate_out);

// --- landmark track ---
// Text file, one record per frame: frame index then points_per_frame (x, y)
// pairs as decimal text, whitespace-separated. Group ranges live in a sidecar.
struct RawTrackFrame {
  int frame_index = 0;
  std::vector<std::pair<double, double>> points;
};
void write_landmark_track(const std::string& path, const std::vector<RawTrackFrame>& frames);
std::vector<RawTrackFrame> read_landmark_track(const std::string& path, int points_per_frame);

// FNV-1a 64-bit content hash of a file (non-cryptographic, cache keying only)
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, size_t n, std::uint64_t seed = 1469598103934665603ULL);
std::string hash_hex(std::uint64_t h);

}  // namespace latentdub::io
