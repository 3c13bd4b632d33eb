#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latentdub/audio_features.hpp"
#include "latentdub/core/image.hpp"
#include "latentdub/reference_selection.hpp"
#include "latentdub/sync_expert.hpp"

namespace latentdub {

struct ClipRecord {
  std::string id;
  std::string identity;
  double fps = 25.0;
  int frame_count = 0;
  std::string frames_dir;           // frame_%05d.ppm
  std::string landmarks_path;       // whitespace landmark track
  std::string landmark_groups_path; // sidecar group ranges
  std::string roi_path;             // per-frame [x,y,w,h]
  std::string mel_path;             // mel cache
  std::string wav_path;
};

struct DatasetManifest {
  int version = 1;
  std::vector<ClipRecord> clips;
  std::string content_hash;  // over all referenced file bytes, clip order

  static DatasetManifest load(const std::string& path);
  // atomic:写 temp then rename; a failed save leaves the prior file untouched
  void save(const std::string& path) const;
  std::string compute_content_hash() const;
};

struct SynthConfig {
  int num_identities = 2;
  int clips_per_identity = 2;
  int frames_per_clip = 120;
  double fps = 25.0;
  int image_size = 64;   // ROI crop size; toy profile needs a multiple of 32
  int frame_margin = 8;  // source frame border around the fixed ROI
  double max_mouth_frac = 0.22;  // mouth height cap as a fraction of the crop
  double openness_gain = 1.0;    // amplitude -> openness slope
  double pose_amp_px = 5.0;      // head drift amplitude
  double pose_hz = 0.22;
  double pose_audio_couple_px = 2.0;  // head bob driven by the envelope
  std::uint64_t seed = 1;

  void validate() const;
};

// per-clip deterministic parameters derived from (seed, identity, clip)
struct SynthClipParams {
  double env_f1 = 0.7, env_f2 = 1.6, env_phi1 = 0.0, env_phi2 = 0.0;
  double pose_phix = 0.0, pose_phiy = 0.0;
  double pitch_hz = 220.0;
  double face_r = 0.55, face_g = 0.45, face_b = 0.35;
};

SynthClipParams synth_clip_params(const SynthConfig& cfg, int identity_idx, int clip_idx);
// the declared amplitude envelope in [0,1]
double synth_envelope(const SynthClipParams& p, double seconds);
// the declared amplitude -> mouth-openness mapping, in pixels
int synth_openness_px(const SynthConfig& cfg, const SynthClipParams& p, int frame);

// renders the dataset under out_dir and returns the manifest (also saved to
// out_dir/manifest.json); fully deterministic per seed
DatasetManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

struct IngestInputs {
  std::string media_path;  // pre-extracted frame directory, or a video file
  std::string audio_path;  // wav
  std::string landmarks_path;
  std::string landmark_groups_path;
  std::string roi_path;
  std::string clip_id;
  std::string identity;
  double fps = 25.0;
};

// appends one clip to manifest.json under out_dir; the manifest update is
// atomic and a failed ingest leaves the previous manifest byte-identical
ClipRecord ingest(const IngestInputs& in, const std::string& out_dir);

// --- loaded views ---
struct LoadedClip {
  ClipRecord record;
  std::vector<Image> frames;            // source frames
  std::vector<Image> crops;             // ROI crops at crop size
  std::vector<RoiRect> roi_boxes;
  std::vector<LandmarkSet> track;       // normalized to the per-frame ROI
  MelSpectrogram mel;
};

LoadedClip load_clip(const ClipRecord& record);
std::vector<LoadedClip> load_dataset(const DatasetManifest& manifest);

// SelectiveSet cache, keyed by (landmark file hash, SIS config); recomputed
// when the landmark file changes
std::vector<std::set<int>> sis_sets_for_clip(const LoadedClip& clip, const SisConfig& cfg,
                                             const std::string& cache_dir);

std::vector<SyncClip> to_sync_clips(const std::vector<LoadedClip>& clips);

}  // namespace latentdub
