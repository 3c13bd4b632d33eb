#include "latentdub/io/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace latentdub::io {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
  os << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<std::uint8_t> buf(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) buf[i] = quantize(img.px[i]);
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write_ppm: write failed " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
  int w = 0, h = 0, maxv = 0;
  is >> w >> h >> maxv;
  if (w <= 0 || h <= 0 || maxv != 255) throw std::runtime_error("read_ppm: bad header " + path);
  is.get();  // single whitespace after maxval
  std::vector<std::uint8_t> buf(static_cast<size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw std::runtime_error("read_ppm: truncated " + path);
  Image img(h, w);
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = buf[i] / 255.0;
  return img;
}

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  const std::uint16_t fmt = 1, channels = 1, bits = 16;
  os.write(reinterpret_cast<const char*>(&fmt), 2);
  os.write(reinterpret_cast<const char*>(&channels), 2);
  write_u32(os, static_cast<std::uint32_t>(sample_rate));
  write_u32(os, static_cast<std::uint32_t>(sample_rate * 2));
  const std::uint16_t block = 2;
  os.write(reinterpret_cast<const char*>(&block), 2);
  os.write(reinterpret_cast<const char*>(&bits), 2);
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    std::int16_t q = static_cast<std::int16_t>(std::lround(c * 32767.0));
    os.write(reinterpret_cast<const char*>(&q), 2);
  }
  if (!os) throw std::runtime_error("write_wav: write failed " + path);
}

std::vector<double> read_wav(const std::string& path, int* sample_rate_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path);
  char tag[4];
  is.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not RIFF " + path);
  read_u32(is);
  is.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not WAVE " + path);

  int sample_rate = 0;
  int bits = 0, channels = 0;
  std::vector<double> samples;
  while (is.read(tag, 4)) {
    std::uint32_t len = read_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t fmt = 0, ch = 0, block = 0, bps = 0;
      std::uint32_t rate = 0, byterate = 0;
      is.read(reinterpret_cast<char*>(&fmt), 2);
      is.read(reinterpret_cast<char*>(&ch), 2);
      rate = read_u32(is);
      byterate = read_u32(is);
      (void)byterate;
      is.read(reinterpret_cast<char*>(&block), 2);
      is.read(reinterpret_cast<char*>(&bps), 2);
      if (fmt != 1 || bps != 16) throw std::runtime_error("read_wav: only PCM16 supported");
      sample_rate = static_cast<int>(rate);
      channels = ch;
      bits = bps;
      if (len > 16) is.seekg(len - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (bits != 16 || channels < 1) throw std::runtime_error("read_wav: data before fmt");
      const size_t n = len / 2;
      std::vector<std::int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(len));
      samples.reserve(n / channels);
      for (size_t i = 0; i < n; i += channels) samples.push_back(raw[i] / 32768.0);
      break;
    } else {
      is.seekg(len, std::ios::cur);
    }
  }
  if (sample_rate == 0) throw std::runtime_error("read_wav: missing fmt chunk " + path);
  if (sample_rate_out) *sample_rate_out = sample_rate;
  return samples;
}

void write_mel_cache(const std::string& path, const Tensor& frames, double hop_seconds,
                     int sample_rate_hz) {
  if (frames.ndim() != 2) throw std::invalid_argument("write_mel_cache: need 2-d tensor");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_mel_cache: cannot open " + path);
  os.write("LDMELV01", 8);
  write_u32(os, 1);  // dtype tag: float64
  write_u32(os, static_cast<std::uint32_t>(frames.dim(0)));
  write_u32(os, static_cast<std::uint32_t>(frames.dim(1)));
  os.write(reinterpret_cast<const char*>(&hop_seconds), 8);
  write_u32(os, static_cast<std::uint32_t>(sample_rate_hz));
  os.write(reinterpret_cast<const char*>(frames.data()),
           static_cast<std::streamsize>(frames.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write_mel_cache: write failed " + path);
}

Tensor read_mel_cache(const std::string& path, double* hop_seconds_out, int* sample_rate_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_mel_cache: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, "LDMELV01", 8) != 0)
    throw std::runtime_error("read_mel_cache: bad magic " + path);
  std::uint32_t dtype = read_u32(is);
  if (dtype != 1) throw std::runtime_error("read_mel_cache: unsupported dtype tag");
  std::uint32_t rows = read_u32(is), cols = read_u32(is);
  double hop = 0.0;
  is.read(reinterpret_cast<char*>(&hop), 8);
  std::uint32_t rate = read_u32(is);
  Tensor t({static_cast<int>(rows), static_cast<int>(cols)});
  is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
  if (!is) throw std::runtime_error("read_mel_cache: truncated " + path);
  if (hop_seconds_out) *hop_seconds_out = hop;
  if (sample_rate_out) *sample_rate_out = static_cast<int>(rate);
  return t;
}

void write_landmark_track(const std::string& path, const std::vector<RawTrackFrame>& frames) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_landmark_track: cannot open " + path);
  os.precision(17);
  for (const auto& f : frames) {
    os << f.frame_index;
    for (const auto& [x, y] : f.points) os << " " << x << " " << y;
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_landmark_track: write failed " + path);
}

std::vector<RawTrackFrame> read_landmark_track(const std::string& path, int points_per_frame) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_landmark_track: cannot open " + path);
  std::vector<RawTrackFrame> out;
  while (true) {
    RawTrackFrame f;
    if (!(is >> f.frame_index)) break;
    f.points.resize(static_cast<size_t>(points_per_frame));
    for (auto& [x, y] : f.points) {
      if (!(is >> x >> y))
        throw std::runtime_error("read_landmark_track: truncated record in " + path);
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::uint64_t fnv1a_bytes(const void* data, size_t n, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    h = fnv1a_bytes(buf, static_cast<size_t>(is.gcount()), h);
    if (!is) break;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace latentdub::io
