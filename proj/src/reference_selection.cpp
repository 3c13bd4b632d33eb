#include "latentdub/reference_selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latentdub {

std::map<std::string, IndexRange> LandmarkSet::default68_groups() {
  return {{"chin", {0, 17}}, {"inner_lip", {60, 68}}, {"eyes", {36, 48}}};
}

void LandmarkSet::validate() const {
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("LandmarkSet: non-finite coordinate");
  const int n = static_cast<int>(points.size());
  std::vector<std::pair<int, int>> ranges;
  for (const auto& [name, r] : groups) {
    if (r.begin < 0 || r.end > n || r.begin >= r.end)
      throw std::invalid_argument("LandmarkSet: group '" + name + "' out of bounds");
    ranges.emplace_back(r.begin, r.end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw std::invalid_argument("LandmarkSet: overlapping groups");
  if (!groups.count("chin") || !groups.count("inner_lip"))
    throw std::invalid_argument("LandmarkSet: chin and inner_lip groups are required");
  if (frame_index < 0) throw std::invalid_argument("LandmarkSet: negative frame_index");
}

const IndexRange& LandmarkSet::group(const std::string& name) const {
  auto it = groups.find(name);
  if (it == groups.end()) throw std::invalid_argument("LandmarkSet: missing group " + name);
  return it->second;
}

LandmarkSet normalize_landmarks(const LandmarkSet& raw, const RoiRect& roi_box) {
  if (roi_box.w <= 0.0 || roi_box.h <= 0.0)
    throw std::invalid_argument("normalize_landmarks: degenerate roi_box");
  LandmarkSet out = raw;
  for (auto& p : out.points) {
    p.x = (p.x - roi_box.x) / roi_box.w;
    p.y = (p.y - roi_box.y) / roi_box.h;
  }
  return out;
}

namespace {

double group_mean_distance(const LandmarkSet& a, const LandmarkSet& b, const std::string& name) {
  const IndexRange& ra = a.group(name);
  const IndexRange& rb = b.group(name);
  if (ra.size() != rb.size())
    throw std::invalid_argument("group distance: mismatched '" + name + "' sizes");
  double sum = 0.0;
  for (int i = 0; i < ra.size(); ++i) {
    const Point2& pa = a.points[static_cast<size_t>(ra.begin + i)];
    const Point2& pb = b.points[static_cast<size_t>(rb.begin + i)];
    sum += std::hypot(pa.x - pb.x, pa.y - pb.y);
  }
  return sum / ra.size();
}

std::vector<int> candidates_for(const std::vector<LandmarkSet>& track, int target,
                                const SisConfig& cfg) {
  if (track.size() < 2) throw std::invalid_argument("top_k: track must have >= 2 frames");
  if (target < 0 || target >= static_cast<int>(track.size()))
    throw std::invalid_argument("top_k: target out of range");
  std::vector<int> cand;
  cand.reserve(track.size());
  for (int i = 0; i < static_cast<int>(track.size()); ++i)
    if (!(cfg.exclude_target && i == target)) cand.push_back(i);
  if (cand.empty()) throw std::invalid_argument("top_k: empty candidate pool");
  return cand;
}

}  // namespace

double pose_distance(const LandmarkSet& a, const LandmarkSet& b) {
  return group_mean_distance(a, b, "chin");
}

double lip_distance(const LandmarkSet& a, const LandmarkSet& b) {
  return group_mean_distance(a, b, "inner_lip");
}

int sis_k(const SisConfig& cfg, int num_frames) {
  if (cfg.k_fraction <= 0.0 || cfg.k_fraction > 1.0)
    throw std::invalid_argument("SisConfig: k_fraction must be in (0,1]");
  if (cfg.min_result < 1) throw std::invalid_argument("SisConfig: min_result must be >= 1");
  int k = static_cast<int>(std::ceil(cfg.k_fraction * num_frames));
  return std::max(k, 1);
}

std::set<int> top_k_pose_set(const std::vector<LandmarkSet>& track, int target,
                             const SisConfig& cfg) {
  auto cand = candidates_for(track, target, cfg);
  const int k = sis_k(cfg, static_cast<int>(track.size()));
  std::stable_sort(cand.begin(), cand.end(), [&](int i, int j) {
    double di = pose_distance(track[static_cast<size_t>(i)], track[static_cast<size_t>(target)]);
    double dj = pose_distance(track[static_cast<size_t>(j)], track[static_cast<size_t>(target)]);
    if (di != dj) return di < dj;
    return i < j;
  });
  cand.resize(std::min<size_t>(cand.size(), static_cast<size_t>(k)));
  return {cand.begin(), cand.end()};
}

std::set<int> top_k_lip_set(const std::vector<LandmarkSet>& track, int target,
                            const SisConfig& cfg) {
  auto cand = candidates_for(track, target, cfg);
  const int k = sis_k(cfg, static_cast<int>(track.size()));
  std::stable_sort(cand.begin(), cand.end(), [&](int i, int j) {
    double di = lip_distance(track[static_cast<size_t>(i)], track[static_cast<size_t>(target)]);
    double dj = lip_distance(track[static_cast<size_t>(j)], track[static_cast<size_t>(target)]);
    if (di != dj) return di > dj;  // most distinct lip movement first
    return i < j;
  });
  cand.resize(std::min<size_t>(cand.size(), static_cast<size_t>(k)));
  return {cand.begin(), cand.end()};
}

SelectiveSet sis_select(const std::vector<LandmarkSet>& track, int target, const SisConfig& cfg) {
  SelectiveSet out;
  out.pose_set = top_k_pose_set(track, target, cfg);
  out.mouth_set = top_k_lip_set(track, target, cfg);
  std::set_intersection(out.pose_set.begin(), out.pose_set.end(), out.mouth_set.begin(),
                        out.mouth_set.end(), std::inserter(out.final_set, out.final_set.end()));

  if (static_cast<int>(out.final_set.size()) < cfg.min_result) {
    // pad from the pose set, most distinct lips first (pose alignment wins,
    // so fallback members always stay pose-aligned)
    out.fallback_used = true;
    std::vector<int> pool(out.pose_set.begin(), out.pose_set.end());
    std::stable_sort(pool.begin(), pool.end(), [&](int i, int j) {
      double di = lip_distance(track[static_cast<size_t>(i)], track[static_cast<size_t>(target)]);
      double dj = lip_distance(track[static_cast<size_t>(j)], track[static_cast<size_t>(target)]);
      if (di != dj) return di > dj;
      return i < j;
    });
    for (int idx : pool) {
      if (static_cast<int>(out.final_set.size()) >= cfg.min_result) break;
      out.final_set.insert(idx);
    }
  }
  if (out.final_set.empty()) throw std::invalid_argument("sis_select: empty final set");
  return out;
}

}  // namespace latentdub
