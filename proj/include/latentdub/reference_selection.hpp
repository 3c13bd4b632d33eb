#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace latentdub {

struct Point2 {
  double x = 0.0, y = 0.0;
};

struct IndexRange {
  int begin = 0, end = 0;  // end-exclusive
  int size() const { return end - begin; }
};

// Per-frame 2-d facial landmarks with named groups. The default scheme is the
// 68-point convention: chin = jawline 0..16, inner_lip = 60..67.
struct LandmarkSet {
  std::vector<Point2> points;
  std::map<std::string, IndexRange> groups;
  int frame_index = 0;

  static std::map<std::string, IndexRange> default68_groups();
  void validate() const;  // throws std::invalid_argument on broken invariants
  const IndexRange& group(const std::string& name) const;
};

struct RoiRect {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

struct SisConfig {
  double k_fraction = 0.4;
  int min_result = 1;
  bool exclude_target = true;
};

struct SelectiveSet {
  std::set<int> pose_set;   // top-k most pose-similar frames
  std::set<int> mouth_set;  // top-k most lip-dissimilar frames
  std::set<int> final_set;
  bool fallback_used = false;
};

// translate to ROI origin and scale each axis so the ROI spans [0,1]^2
LandmarkSet normalize_landmarks(const LandmarkSet& raw, const RoiRect& roi_box);

// mean Euclidean distance over corresponding chin landmarks
double pose_distance(const LandmarkSet& a, const LandmarkSet& b);
// same over the inner_lip group
double lip_distance(const LandmarkSet& a, const LandmarkSet& b);

// k = ceil(k_fraction * track size); ties break toward the smaller frame index
std::set<int> top_k_pose_set(const std::vector<LandmarkSet>& track, int target,
                             const SisConfig& cfg);
// k frames with the LARGEST lip distance to the target
std::set<int> top_k_lip_set(const std::vector<LandmarkSet>& track, int target,
                            const SisConfig& cfg);

SelectiveSet sis_select(const std::vector<LandmarkSet>& track, int target, const SisConfig& cfg);

int sis_k(const SisConfig& cfg, int num_frames);

}  // namespace latentdub
