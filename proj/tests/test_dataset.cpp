#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "latentdub/dataset.hpp"
#include "latentdub/io/formats.hpp"

using namespace latentdub;
namespace fs = std::filesystem;

namespace {

SynthConfig small_cfg() {
  SynthConfig cfg;
  cfg.num_identities = 2;
  cfg.clips_per_identity = 1;
  cfg.frames_per_clip = 30;
  cfg.seed = 7;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// rows of the mouth opening actually rendered at the mouth center column
int measured_mouth_height(const Image& img, double cx, double cy, double ry) {
  (void)cy;
  (void)ry;
  int count = 0;
  int x = static_cast<int>(cx);
  for (int y = 0; y < img.h; ++y) {
    if (std::abs(img.at(y, x, 0) - 0.1) < 0.02 && std::abs(img.at(y, x, 1) - 0.05) < 0.02)
      ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("synth_dataset is byte-identical per seed") {
  auto cfg = small_cfg();
  auto d1 = fresh_dir("ldub_synth_a");
  auto d2 = fresh_dir("ldub_synth_b");
  auto m1 = synth_dataset(cfg, d1.string());
  auto m2 = synth_dataset(cfg, d2.string());
  CHECK(m1.content_hash == m2.content_hash);

  cfg.seed = 8;
  auto d3 = fresh_dir("ldub_synth_c");
  auto m3 = synth_dataset(cfg, d3.string());
  CHECK(m1.content_hash != m3.content_hash);
  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("mouth openness in frame t follows the declared envelope function") {
  auto cfg = small_cfg();
  auto dir = fresh_dir("ldub_synth_mouth");
  auto manifest = synth_dataset(cfg, dir.string());
  auto clip = load_clip(manifest.clips[0]);
  auto params = synth_clip_params(cfg, 0, 0);

  for (int t = 0; t < cfg.frames_per_clip; t += 3) {
    int openness = synth_openness_px(cfg, params, t);
    // rasterized ellipse rows at the center column: pixel centers within ry
    double S = cfg.image_size;
    double ts = t / cfg.fps;
    double e = synth_envelope(params, ts);
    double cy = cfg.frame_margin + S / 2.0 +
                cfg.pose_amp_px * std::sin(2 * 3.14159265358979 * cfg.pose_hz * 0.77 * ts +
                                           params.pose_phiy) +
                cfg.pose_audio_couple_px * (e - 0.5) + 0.18 * S;
    double cx = cfg.frame_margin + S / 2.0 +
                cfg.pose_amp_px *
                    std::sin(2 * 3.14159265358979 * cfg.pose_hz * ts + params.pose_phix);
    double ry = std::max(0.8, openness / 2.0);
    int expected = 0;
    for (int y = 0; y < clip.frames[t].h; ++y)
      if (std::abs(y + 0.5 - cy) <= ry) ++expected;
    CHECK(measured_mouth_height(clip.frames[static_cast<size_t>(t)], cx, cy, ry) == expected);
  }
  fs::remove_all(dir);
}

TEST_CASE("identities differ in face color and audio pitch band") {
  auto cfg = small_cfg();
  auto p0 = synth_clip_params(cfg, 0, 0);
  auto p1 = synth_clip_params(cfg, 1, 0);
  CHECK(p0.pitch_hz >= 220.0);
  CHECK(p0.pitch_hz <= 250.0);
  CHECK(p1.pitch_hz >= 440.0);
  CHECK(p1.pitch_hz <= 470.0);
  CHECK(std::abs(p0.face_r - p1.face_r) + std::abs(p0.face_g - p1.face_g) > 1e-6);
}

TEST_CASE("manifest save/load round trip and content hash integrity") {
  auto cfg = small_cfg();
  auto dir = fresh_dir("ldub_manifest");
  auto manifest = synth_dataset(cfg, dir.string());
  auto loaded = DatasetManifest::load((dir / "manifest.json").string());
  REQUIRE(loaded.clips.size() == manifest.clips.size());
  CHECK(loaded.content_hash == manifest.content_hash);
  CHECK(loaded.clips[0].id == manifest.clips[0].id);
  CHECK(loaded.compute_content_hash() == manifest.content_hash);

  // mutate a referenced file: hash must change
  {
    std::ofstream os(loaded.clips[0].wav_path, std::ios::app | std::ios::binary);
    os << "x";
  }
  CHECK(loaded.compute_content_hash() != manifest.content_hash);
  fs::remove_all(dir);
}

TEST_CASE("load_clip crops are bit-exact ROI subregions with normalized landmarks") {
  auto cfg = small_cfg();
  auto dir = fresh_dir("ldub_loadclip");
  auto manifest = synth_dataset(cfg, dir.string());
  auto clip = load_clip(manifest.clips[1]);

  REQUIRE(static_cast<int>(clip.crops.size()) == cfg.frames_per_clip);
  REQUIRE(static_cast<int>(clip.track.size()) == cfg.frames_per_clip);
  CHECK(clip.crops[0].h == cfg.image_size);
  CHECK(video_frame_count(clip.mel, cfg.fps) == cfg.frames_per_clip);

  const auto& box = clip.roi_boxes[4];
  for (int y = 0; y < cfg.image_size; y += 7)
    for (int x = 0; x < cfg.image_size; x += 7)
      for (int c = 0; c < 3; ++c)
        CHECK(clip.crops[4].at(y, x, c) ==
              clip.frames[4].at(static_cast<int>(box.y) + y, static_cast<int>(box.x) + x, c));

  // normalized landmarks live in the unit square
  for (const auto& s : clip.track)
    for (const auto& p : s.points) {
      CHECK(p.x > -0.2);
      CHECK(p.x < 1.2);
      CHECK(p.y > -0.2);
      CHECK(p.y < 1.2);
    }
  fs::remove_all(dir);
}

TEST_CASE("ingest accepts pre-extracted frames and rejects count mismatches") {
  auto cfg = small_cfg();
  auto src = fresh_dir("ldub_ingest_src");
  auto manifest = synth_dataset(cfg, src.string());
  const auto& donor = manifest.clips[0];

  auto out = fresh_dir("ldub_ingest_out");
  IngestInputs in;
  in.media_path = donor.frames_dir;
  in.audio_path = donor.wav_path;
  in.landmarks_path = donor.landmarks_path;
  in.landmark_groups_path = donor.landmark_groups_path;
  in.roi_path = donor.roi_path;
  in.clip_id = "ingested0";
  in.identity = "idX";
  auto rec = ingest(in, out.string());
  CHECK(rec.frame_count == cfg.frames_per_clip);
  auto m1 = DatasetManifest::load((out / "manifest.json").string());
  CHECK(m1.clips.size() == 1);

  // re-ingesting unchanged inputs under a new id yields the same per-clip bytes,
  // so a rebuilt single-clip manifest hash is reproducible
  auto out2 = fresh_dir("ldub_ingest_out2");
  auto rec2 = ingest(in, out2.string());
  auto m2 = DatasetManifest::load((out2 / "manifest.json").string());
  CHECK(m2.content_hash == m1.content_hash);

  // truncated track: rejected, manifest untouched byte-for-byte
  auto manifest_bytes_before = io::fnv1a_file((out / "manifest.json").string());
  auto track = io::read_landmark_track(donor.landmarks_path, 68);
  track.pop_back();
  auto short_track = (out / "short_track.txt").string();
  io::write_landmark_track(short_track, track);
  IngestInputs bad = in;
  bad.clip_id = "ingested1";
  bad.landmarks_path = short_track;
  CHECK_THROWS(ingest(bad, out.string()));
  CHECK(io::fnv1a_file((out / "manifest.json").string()) == manifest_bytes_before);

  fs::remove_all(src);
  fs::remove_all(out);
  fs::remove_all(out2);
}

TEST_CASE("SIS sets are cached and cache hits return identical sets") {
  auto cfg = small_cfg();
  auto dir = fresh_dir("ldub_sis_cache");
  auto manifest = synth_dataset(cfg, dir.string());
  auto clip = load_clip(manifest.clips[0]);

  SisConfig sis;
  auto cache_dir = (dir / "cache").string();
  auto s1 = sis_sets_for_clip(clip, sis, cache_dir);
  REQUIRE(static_cast<int>(s1.size()) == cfg.frames_per_clip);
  size_t files_after_first = std::distance(fs::directory_iterator(cache_dir), {});
  auto s2 = sis_sets_for_clip(clip, sis, cache_dir);
  CHECK(s1 == s2);
  CHECK(std::distance(fs::directory_iterator(cache_dir), {}) ==
        static_cast<long>(files_after_first));

  // editing the landmark file changes the key, forcing a recompute
  {
    auto track = io::read_landmark_track(clip.record.landmarks_path, 68);
    track[0].points[0].first += 1.0;
    io::write_landmark_track(clip.record.landmarks_path, track);
  }
  auto clip2 = load_clip(clip.record);
  auto s3 = sis_sets_for_clip(clip2, sis, cache_dir);
  CHECK(std::distance(fs::directory_iterator(cache_dir), {}) ==
        static_cast<long>(files_after_first + 1));
  CHECK(static_cast<int>(s3.size()) == cfg.frames_per_clip);

  for (const auto& s : s1) CHECK(!s.empty());
  fs::remove_all(dir);
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.image_size = 48;  // not a multiple of 32
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.frames_per_clip = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.pose_amp_px = 40.0;  // face would leave the ROI
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(SynthConfig{}.validate());
}
