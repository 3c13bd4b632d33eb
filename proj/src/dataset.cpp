#include "latentdub/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "latentdub/io/formats.hpp"

namespace fs = std::filesystem;

namespace latentdub {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

std::string frame_name(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.ppm", idx);
  return buf;
}

nlohmann::json clip_to_json(const ClipRecord& c) {
  return {{"id", c.id},
          {"identity", c.identity},
          {"fps", c.fps},
          {"frame_count", c.frame_count},
          {"frames_dir", c.frames_dir},
          {"landmarks", c.landmarks_path},
          {"landmark_groups", c.landmark_groups_path},
          {"roi", c.roi_path},
          {"mel", c.mel_path},
          {"wav", c.wav_path}};
}

ClipRecord clip_from_json(const nlohmann::json& j) {
  ClipRecord c;
  c.id = j.at("id").get<std::string>();
  c.identity = j.at("identity").get<std::string>();
  c.fps = j.at("fps").get<double>();
  c.frame_count = j.at("frame_count").get<int>();
  c.frames_dir = j.at("frames_dir").get<std::string>();
  c.landmarks_path = j.at("landmarks").get<std::string>();
  c.landmark_groups_path = j.at("landmark_groups").get<std::string>();
  c.roi_path = j.at("roi").get<std::string>();
  c.mel_path = j.at("mel").get<std::string>();
  c.wav_path = j.at("wav").get<std::string>();
  return c;
}

void fill_circle(Image& img, double cx, double cy, double r, double cr, double cg, double cb) {
  int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + r)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) {
        img.at(y, x, 0) = cr;
        img.at(y, x, 1) = cg;
        img.at(y, x, 2) = cb;
      }
    }
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, double cr, double cg,
                  double cb) {
  if (rx <= 0 || ry <= 0) return;
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + ry)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) {
        img.at(y, x, 0) = cr;
        img.at(y, x, 1) = cg;
        img.at(y, x, 2) = cb;
      }
    }
}

struct FaceLayout {
  double cx, cy;       // face center in source-frame coords
  double face_radius;
  double mouth_cx, mouth_cy, mouth_rx, mouth_ry;
  double eye_dx, eye_dy, eye_r;
};

FaceLayout face_layout(const SynthConfig& cfg, const SynthClipParams& p, int frame) {
  const double S = cfg.image_size;
  const double ts = frame / cfg.fps;
  const double e = synth_envelope(p, ts);
  FaceLayout f;
  const double base = cfg.frame_margin + S / 2.0;
  f.cx = base + cfg.pose_amp_px * std::sin(kTau * cfg.pose_hz * ts + p.pose_phix);
  f.cy = base + cfg.pose_amp_px * std::sin(kTau * cfg.pose_hz * 0.77 * ts + p.pose_phiy) +
         cfg.pose_audio_couple_px * (e - 0.5);
  f.face_radius = 0.36 * S;
  f.mouth_cx = f.cx;
  f.mouth_cy = f.cy + 0.18 * S;
  f.mouth_rx = 0.16 * S;
  f.mouth_ry = synth_openness_px(cfg, p, frame) / 2.0;
  f.eye_dx = 0.14 * S;
  f.eye_dy = 0.12 * S;
  f.eye_r = 0.045 * S;
  return f;
}

Image render_frame(const SynthConfig& cfg, const SynthClipParams& p, int frame) {
  const int side = cfg.image_size + 2 * cfg.frame_margin;
  Image img(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      img.at(y, x, 0) = 0.85;
      img.at(y, x, 1) = 0.88;
      img.at(y, x, 2) = 0.90;
    }
  auto f = face_layout(cfg, p, frame);
  fill_circle(img, f.cx, f.cy, f.face_radius, p.face_r, p.face_g, p.face_b);
  fill_circle(img, f.cx - f.eye_dx, f.cy - f.eye_dy, f.eye_r, 0.08, 0.08, 0.1);
  fill_circle(img, f.cx + f.eye_dx, f.cy - f.eye_dy, f.eye_r, 0.08, 0.08, 0.1);
  // outer lip rim then the opening
  fill_ellipse(img, f.mouth_cx, f.mouth_cy, f.mouth_rx + 2.0, std::max(1.5, f.mouth_ry + 1.5),
               0.45, 0.2, 0.2);
  fill_ellipse(img, f.mouth_cx, f.mouth_cy, f.mouth_rx, std::max(0.8, f.mouth_ry), 0.1, 0.05,
               0.05);
  return img;
}

io::RawTrackFrame landmarks_for(const SynthConfig& cfg, const SynthClipParams& p, int frame) {
  auto f = face_layout(cfg, p, frame);
  io::RawTrackFrame out;
  out.frame_index = frame;
  out.points.assign(68, {f.cx, f.cy});
  // 0..16 jawline along the lower face arc
  for (int i = 0; i <= 16; ++i) {
    double a = std::numbers::pi * (0.1 + 0.8 * i / 16.0);
    out.points[static_cast<size_t>(i)] = {f.cx - f.face_radius * std::cos(a),
                                          f.cy + f.face_radius * std::sin(a)};
  }
  // 17..26 brows, 27..35 nose: rigid with the head
  for (int i = 17; i <= 26; ++i)
    out.points[static_cast<size_t>(i)] = {f.cx + (i - 21.5) * 0.05 * cfg.image_size,
                                          f.cy - 0.22 * cfg.image_size};
  for (int i = 27; i <= 35; ++i)
    out.points[static_cast<size_t>(i)] = {f.cx, f.cy - 0.1 * cfg.image_size + (i - 27) * 1.5};
  // 36..47 eye rings
  for (int side = 0; side < 2; ++side) {
    double ex = side == 0 ? f.cx - f.eye_dx : f.cx + f.eye_dx;
    for (int j = 0; j < 6; ++j) {
      double a = kTau * j / 6.0;
      out.points[static_cast<size_t>(36 + 6 * side + j)] = {ex + f.eye_r * std::cos(a),
                                                            f.cy - f.eye_dy + f.eye_r * std::sin(a)};
    }
  }
  // 48..59 outer lip, 60..67 inner lip rings
  for (int j = 0; j < 12; ++j) {
    double a = kTau * j / 12.0;
    out.points[static_cast<size_t>(48 + j)] = {f.mouth_cx + (f.mouth_rx + 2.0) * std::cos(a),
                                               f.mouth_cy + (f.mouth_ry + 1.5) * std::sin(a)};
  }
  for (int j = 0; j < 8; ++j) {
    double a = kTau * j / 8.0;
    out.points[static_cast<size_t>(60 + j)] = {f.mouth_cx + f.mouth_rx * std::cos(a),
                                               f.mouth_cy + f.mouth_ry * std::sin(a)};
  }
  return out;
}

std::vector<double> synth_audio(const SynthConfig& cfg, const SynthClipParams& p) {
  const int spf = static_cast<int>(std::lround(16000.0 / cfg.fps));
  std::vector<double> samples(static_cast<size_t>(cfg.frames_per_clip) * spf);
  for (size_t k = 0; k < samples.size(); ++k) {
    double t = static_cast<double>(k) / 16000.0;
    samples[k] = 0.75 * synth_envelope(p, t) * std::sin(kTau * p.pitch_hz * t);
  }
  return samples;
}

std::uint64_t hash_file_into(std::uint64_t h, const std::string& path) {
  std::uint64_t fh = io::fnv1a_file(path);
  return io::fnv1a_bytes(&fh, sizeof(fh), h);
}

}  // namespace

void SynthConfig::validate() const {
  if (num_identities < 1 || clips_per_identity < 1 || frames_per_clip < 1)
    throw std::invalid_argument("SynthConfig: counts must be >= 1");
  if (image_size % 32 != 0)
    throw std::invalid_argument("SynthConfig: image_size must be divisible by 32 (toy profile)");
  if (!(fps > 0)) throw std::invalid_argument("SynthConfig: fps must be > 0");
  double spf = 16000.0 / fps;
  if (std::fabs(spf - std::lround(spf)) > 1e-9)
    throw std::invalid_argument("SynthConfig: fps must divide the 16 kHz sample rate");
  double hop_per_frame = spf / 160.0;
  if (std::fabs(hop_per_frame - std::lround(hop_per_frame)) > 1e-9)
    throw std::invalid_argument("SynthConfig: frame duration must be a whole number of mel hops");
  if (frame_margin < 0) throw std::invalid_argument("SynthConfig: frame_margin must be >= 0");
  double max_shift = pose_amp_px + pose_audio_couple_px / 2.0;
  if (0.36 * image_size + max_shift > image_size / 2.0)
    throw std::invalid_argument("SynthConfig: face drifts outside the ROI");
}

SynthClipParams synth_clip_params(const SynthConfig& cfg, int identity_idx, int clip_idx) {
  std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(identity_idx) * 8191ULL +
                      static_cast<std::uint64_t>(clip_idx));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SynthClipParams p;
  p.env_f1 = 0.5 + 0.4 * u(rng);
  p.env_f2 = 1.3 + 0.6 * u(rng);
  p.env_phi1 = kTau * u(rng);
  p.env_phi2 = kTau * u(rng);
  p.pose_phix = kTau * u(rng);
  p.pose_phiy = kTau * u(rng);
  // disjoint pitch bands per identity (supports the anti-leakage check)
  p.pitch_hz = 220.0 * (identity_idx + 1) + 30.0 * u(rng);
  p.face_r = 0.45 + 0.3 * u(rng);
  p.face_g = 0.35 + 0.25 * u(rng);
  p.face_b = 0.3 + 0.2 * u(rng);
  return p;
}

double synth_envelope(const SynthClipParams& p, double seconds) {
  double e = 0.5 + 0.3 * std::sin(kTau * p.env_f1 * seconds + p.env_phi1) +
             0.3 * std::sin(kTau * p.env_f2 * seconds + p.env_phi2);
  return std::clamp(e, 0.0, 1.0);
}

int synth_openness_px(const SynthConfig& cfg, const SynthClipParams& p, int frame) {
  double e = synth_envelope(p, frame / cfg.fps);
  double px = cfg.max_mouth_frac * cfg.image_size * std::clamp(cfg.openness_gain * e, 0.0, 1.0);
  return static_cast<int>(std::lround(px));
}

DatasetManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  DatasetManifest manifest;
  fs::create_directories(out_dir);
  for (int id = 0; id < cfg.num_identities; ++id) {
    for (int cl = 0; cl < cfg.clips_per_identity; ++cl) {
      auto p = synth_clip_params(cfg, id, cl);
      ClipRecord rec;
      rec.id = "id" + std::to_string(id) + "_clip" + std::to_string(cl);
      rec.identity = "id" + std::to_string(id);
      rec.fps = cfg.fps;
      rec.frame_count = cfg.frames_per_clip;
      fs::path clip_dir = fs::path(out_dir) / "clips" / rec.id;
      fs::create_directories(clip_dir / "frames");

      std::vector<io::RawTrackFrame> track;
      nlohmann::json roi = nlohmann::json::array();
      for (int f = 0; f < cfg.frames_per_clip; ++f) {
        io::write_ppm((clip_dir / "frames" / frame_name(f)).string(), render_frame(cfg, p, f));
        track.push_back(landmarks_for(cfg, p, f));
        roi.push_back({cfg.frame_margin, cfg.frame_margin, cfg.image_size, cfg.image_size});
      }
      rec.frames_dir = (clip_dir / "frames").string();
      rec.landmarks_path = (clip_dir / "track.txt").string();
      io::write_landmark_track(rec.landmarks_path, track);

      rec.landmark_groups_path = (clip_dir / "groups.json").string();
      {
        nlohmann::json groups = {{"version", 1},
                                 {"points_per_frame", 68},
                                 {"groups",
                                  {{"chin", {0, 17}}, {"inner_lip", {60, 68}}, {"eyes", {36, 48}}}}};
        std::ofstream os(rec.landmark_groups_path);
        os << groups.dump(2) << "\n";
      }

      rec.roi_path = (clip_dir / "roi.json").string();
      {
        std::ofstream os(rec.roi_path);
        os << roi.dump() << "\n";
      }

      rec.wav_path = (clip_dir / "audio.wav").string();
      io::write_wav(rec.wav_path, synth_audio(cfg, p), 16000);
      int rate = 0;
      auto samples = io::read_wav(rec.wav_path, &rate);  // mel from the quantized audio
      auto mel = compute_mel(samples);
      rec.mel_path = (clip_dir / "mel.ldmel").string();
      io::write_mel_cache(rec.mel_path, mel.frames, mel.hop_seconds, mel.sample_rate_hz);

      {
        nlohmann::json sj = {{"env_f1", p.env_f1},     {"env_f2", p.env_f2},
                             {"env_phi1", p.env_phi1}, {"env_phi2", p.env_phi2},
                             {"pose_phix", p.pose_phix}, {"pose_phiy", p.pose_phiy},
                             {"pitch_hz", p.pitch_hz}};
        std::ofstream os((clip_dir / "synth.json").string());
        os << sj.dump(2) << "\n";
      }
      manifest.clips.push_back(std::move(rec));
    }
  }
  manifest.content_hash = manifest.compute_content_hash();
  manifest.save((fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

std::string DatasetManifest::compute_content_hash() const {
  // location-independent: structural fields plus referenced file bytes
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& c : clips) {
    nlohmann::json structural = {
        {"id", c.id}, {"identity", c.identity}, {"fps", c.fps}, {"frame_count", c.frame_count}};
    auto j = structural.dump();
    h = io::fnv1a_bytes(j.data(), j.size(), h);
    for (int f = 0; f < c.frame_count; ++f)
      h = hash_file_into(h, (fs::path(c.frames_dir) / frame_name(f)).string());
    h = hash_file_into(h, c.landmarks_path);
    h = hash_file_into(h, c.landmark_groups_path);
    h = hash_file_into(h, c.roi_path);
    h = hash_file_into(h, c.mel_path);
    h = hash_file_into(h, c.wav_path);
  }
  return io::hash_hex(h);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("manifest: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != 1) throw std::runtime_error("manifest: unsupported version");
  for (const auto& cj : j.at("clips")) m.clips.push_back(clip_from_json(cj));
  m.content_hash = j.at("content_hash").get<std::string>();
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = version;
  auto arr = nlohmann::json::array();
  for (const auto& c : clips) arr.push_back(clip_to_json(c));
  j["clips"] = arr;
  j["content_hash"] = content_hash;
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("manifest: cannot write " + tmp);
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("manifest: write failed " + tmp);
  }
  fs::rename(tmp, path);
}

ClipRecord ingest(const IngestInputs& in, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  DatasetManifest manifest;
  if (fs::exists(manifest_path)) manifest = DatasetManifest::load(manifest_path);

  ClipRecord rec;
  rec.id = in.clip_id;
  rec.identity = in.identity;
  rec.fps = in.fps;
  for (const auto& c : manifest.clips)
    if (c.id == rec.id) throw std::runtime_error("ingest: duplicate clip id " + rec.id);

  if (fs::is_directory(in.media_path)) {
    rec.frames_dir = in.media_path;
  } else {
    // delegate decoding to an external tool; pre-extracted directories are
    // the first-class path and the only one tests rely on
    fs::path extracted = fs::path(out_dir) / "extracted" / rec.id;
    fs::create_directories(extracted);
    std::string cmd = "ffmpeg -v error -y -i '" + in.media_path + "' '" +
                      (extracted / "frame_%05d.ppm").string() + "'";
    if (std::system(cmd.c_str()) != 0)
      throw std::runtime_error("ingest: external frame extraction failed for " + in.media_path);
    // ffmpeg numbers from 1; renumber to the frame_%05d convention from 0
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(extracted)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (size_t i = 0; i < files.size(); ++i) {
      fs::path want = extracted / frame_name(static_cast<int>(i));
      if (files[i] != want) fs::rename(files[i], want);
    }
    rec.frames_dir = extracted.string();
  }

  int n_frames = 0;
  while (fs::exists(fs::path(rec.frames_dir) / frame_name(n_frames))) ++n_frames;
  if (n_frames == 0) throw std::runtime_error("ingest: no frames found in " + rec.frames_dir);
  rec.frame_count = n_frames;

  auto track = io::read_landmark_track(in.landmarks_path, 68);
  if (static_cast<int>(track.size()) != n_frames)
    throw std::runtime_error("ingest: frame/landmark count mismatch (" +
                             std::to_string(n_frames) + " frames vs " +
                             std::to_string(track.size()) + " landmark records)");
  rec.landmarks_path = in.landmarks_path;
  rec.landmark_groups_path = in.landmark_groups_path;

  {
    std::ifstream is(in.roi_path);
    if (!is) throw std::runtime_error("ingest: cannot open roi file " + in.roi_path);
    nlohmann::json rois = nlohmann::json::parse(is);
    if (static_cast<int>(rois.size()) != n_frames)
      throw std::runtime_error("ingest: frame/roi count mismatch");
  }
  rec.roi_path = in.roi_path;

  int rate = 0;
  auto samples = io::read_wav(in.audio_path, &rate);
  auto samples16k = resample_to_16k(samples, rate);
  auto mel = compute_mel(samples16k);
  fs::create_directories(fs::path(out_dir) / "mel");
  rec.mel_path = (fs::path(out_dir) / "mel" / (rec.id + ".ldmel")).string();
  io::write_mel_cache(rec.mel_path, mel.frames, mel.hop_seconds, mel.sample_rate_hz);
  rec.wav_path = in.audio_path;

  manifest.clips.push_back(rec);
  manifest.content_hash = manifest.compute_content_hash();
  manifest.save(manifest_path);
  return rec;
}

LoadedClip load_clip(const ClipRecord& record) {
  LoadedClip out;
  out.record = record;
  out.frames.reserve(static_cast<size_t>(record.frame_count));
  for (int f = 0; f < record.frame_count; ++f)
    out.frames.push_back(io::read_ppm((fs::path(record.frames_dir) / frame_name(f)).string()));

  {
    std::ifstream is(record.roi_path);
    nlohmann::json rois = nlohmann::json::parse(is);
    for (const auto& r : rois)
      out.roi_boxes.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                               r[3].get<double>()});
  }

  std::map<std::string, IndexRange> groups = LandmarkSet::default68_groups();
  int points_per_frame = 68;
  {
    std::ifstream is(record.landmark_groups_path);
    if (is) {
      nlohmann::json g = nlohmann::json::parse(is);
      points_per_frame = g.at("points_per_frame").get<int>();
      groups.clear();
      for (const auto& [name, range] : g.at("groups").items())
        groups[name] = {range[0].get<int>(), range[1].get<int>()};
    }
  }
  auto raw_track = io::read_landmark_track(record.landmarks_path, points_per_frame);
  for (size_t f = 0; f < raw_track.size(); ++f) {
    LandmarkSet s;
    s.frame_index = raw_track[f].frame_index;
    s.groups = groups;
    for (const auto& [x, y] : raw_track[f].points) s.points.push_back({x, y});
    s.validate();
    out.track.push_back(normalize_landmarks(s, out.roi_boxes[f]));
  }

  double hop = 0;
  int rate = 0;
  out.mel.frames = io::read_mel_cache(record.mel_path, &hop, &rate);
  out.mel.hop_seconds = hop;
  out.mel.sample_rate_hz = rate;

  // ROI crops; the crop is bit-exact when the box is integral and unscaled
  for (int f = 0; f < record.frame_count; ++f) {
    const auto& box = out.roi_boxes[static_cast<size_t>(f)];
    int x0 = static_cast<int>(std::lround(box.x)), y0 = static_cast<int>(std::lround(box.y));
    int w = static_cast<int>(std::lround(box.w)), h = static_cast<int>(std::lround(box.h));
    Image crop(h, w);
    const Image& src = out.frames[static_cast<size_t>(f)];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) crop.at(y, x, c) = src.at(y0 + y, x0 + x, c);
    out.crops.push_back(std::move(crop));
  }
  return out;
}

std::vector<LoadedClip> load_dataset(const DatasetManifest& manifest) {
  std::vector<LoadedClip> out;
  out.reserve(manifest.clips.size());
  for (const auto& c : manifest.clips) out.push_back(load_clip(c));
  return out;
}

std::vector<std::set<int>> sis_sets_for_clip(const LoadedClip& clip, const SisConfig& cfg,
                                             const std::string& cache_dir) {
  std::uint64_t key = io::fnv1a_file(clip.record.landmarks_path);
  key = io::fnv1a_bytes(&cfg.k_fraction, sizeof(cfg.k_fraction), key);
  key = io::fnv1a_bytes(&cfg.min_result, sizeof(cfg.min_result), key);
  key = io::fnv1a_bytes(&cfg.exclude_target, sizeof(cfg.exclude_target), key);
  fs::create_directories(cache_dir);
  fs::path cache_file = fs::path(cache_dir) / ("sis_" + io::hash_hex(key) + ".json");

  if (fs::exists(cache_file)) {
    std::ifstream is(cache_file);
    nlohmann::json j = nlohmann::json::parse(is);
    std::vector<std::set<int>> sets;
    for (const auto& arr : j) {
      std::set<int> s;
      for (const auto& v : arr) s.insert(v.get<int>());
      sets.push_back(std::move(s));
    }
    if (static_cast<int>(sets.size()) == clip.record.frame_count) return sets;
  }

  std::vector<std::set<int>> sets;
  sets.reserve(static_cast<size_t>(clip.record.frame_count));
  for (int t = 0; t < clip.record.frame_count; ++t)
    sets.push_back(sis_select(clip.track, t, cfg).final_set);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : sets) j.push_back(std::vector<int>(s.begin(), s.end()));
  std::ofstream os(cache_file);
  os << j.dump() << "\n";
  return sets;
}

std::vector<SyncClip> to_sync_clips(const std::vector<LoadedClip>& clips) {
  std::vector<SyncClip> out;
  out.reserve(clips.size());
  for (const auto& c : clips) {
    SyncClip s;
    s.identity = c.record.identity;
    s.crops = c.crops;
    s.mel = c.mel;
    s.fps = c.record.fps;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latentdub
