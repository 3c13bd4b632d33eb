#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "latentdub/reference_selection.hpp"

using namespace latentdub;

namespace {

LandmarkSet random_landmarks(std::mt19937_64& rng, int frame_index) {
  LandmarkSet s;
  s.frame_index = frame_index;
  s.groups = LandmarkSet::default68_groups();
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 68; ++i) s.points.push_back({d(rng), d(rng)});
  return s;
}

std::vector<LandmarkSet> random_track(std::mt19937_64& rng, int n) {
  std::vector<LandmarkSet> track;
  for (int i = 0; i < n; ++i) track.push_back(random_landmarks(rng, i));
  return track;
}

// independent elementwise oracle: mean euclidean over a named group
double oracle_group_dist(const LandmarkSet& a, const LandmarkSet& b, int begin, int end) {
  double sum = 0.0;
  for (int i = begin; i < end; ++i) {
    double dx = a.points[i].x - b.points[i].x;
    double dy = a.points[i].y - b.points[i].y;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / (end - begin);
}

// independent full-sort oracle for top-k selection
std::set<int> oracle_top_k(const std::vector<LandmarkSet>& track, int target, int k,
                           bool exclude_target, bool largest, int begin, int end) {
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < static_cast<int>(track.size()); ++i) {
    if (exclude_target && i == target) continue;
    double d = oracle_group_dist(track[i], track[target], begin, end);
    scored.push_back({largest ? -d : d, i});
  }
  std::sort(scored.begin(), scored.end());
  std::set<int> out;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(scored.size())); ++i)
    out.insert(scored[i].second);
  return out;
}

// a 10-frame track engineered so pose top-4 = {2,3,5,7} and lip top-4 = {3,6,7,9}
std::vector<LandmarkSet> constructed_track() {
  std::vector<double> chin_pos = {0.0, 0.5, 0.01, 0.02, 0.6, 0.03, 0.7, 0.04, 0.8, 0.9};
  std::vector<double> lip_pos = {0.0, 0.001, 0.002, 0.80, 0.003, 0.004, 0.78, 0.79, 0.005, 0.95};
  std::vector<LandmarkSet> track;
  for (int f = 0; f < 10; ++f) {
    LandmarkSet s;
    s.frame_index = f;
    s.groups = LandmarkSet::default68_groups();
    s.points.resize(68);
    for (int i = 0; i < 68; ++i) s.points[i] = {0.5, 0.5};
    for (int i = 0; i < 17; ++i) s.points[i] = {chin_pos[f], 0.0};
    for (int i = 60; i < 68; ++i) s.points[i] = {lip_pos[f], 0.0};
    track.push_back(std::move(s));
  }
  return track;
}

}  // namespace

TEST_CASE("normalize_landmarks maps the ROI to the unit square") {
  LandmarkSet s;
  s.groups = LandmarkSet::default68_groups();
  s.points.resize(68, {128.0, 128.0});
  s.points[1] = {0.0, 0.0};  // ROI corner

  RoiRect roi{0, 0, 256, 256};
  auto n = normalize_landmarks(s, roi);
  CHECK(n.points[0].x == doctest::Approx(0.5));
  CHECK(n.points[0].y == doctest::Approx(0.5));
  CHECK(n.points[1].x == doctest::Approx(0.0));
  CHECK(n.points[1].y == doctest::Approx(0.0));

  CHECK_THROWS_AS(normalize_landmarks(s, RoiRect{0, 0, 0, 256}), std::invalid_argument);

  // random points against a directly computed affine map
  std::mt19937_64 rng(21);
  auto r = random_landmarks(rng, 0);
  RoiRect box{12.5, -3.0, 100.0, 50.0};
  auto rn = normalize_landmarks(r, box);
  for (int i = 0; i < 68; ++i) {
    CHECK(rn.points[i].x == doctest::Approx((r.points[i].x - 12.5) / 100.0));
    CHECK(rn.points[i].y == doctest::Approx((r.points[i].y + 3.0) / 50.0));
  }
}

TEST_CASE("pose_distance analytic and oracle cases") {
  std::mt19937_64 rng(22);
  auto a = random_landmarks(rng, 0);
  CHECK(pose_distance(a, a) == doctest::Approx(0.0));

  auto b = a;
  for (int i = 0; i < 17; ++i) {
    b.points[i].x += 0.03;
    b.points[i].y += 0.04;
  }
  CHECK(pose_distance(a, b) == doctest::Approx(0.05));  // 3-4-5
  CHECK(pose_distance(b, a) == doctest::Approx(0.05));

  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_landmarks(rng, 0);
    auto y = random_landmarks(rng, 1);
    CHECK(pose_distance(x, y) == doctest::Approx(oracle_group_dist(x, y, 0, 17)));
  }

  auto bad = a;
  bad.groups["chin"] = {0, 10};
  CHECK_THROWS_AS(pose_distance(a, bad), std::invalid_argument);
}

TEST_CASE("lip_distance is orthogonal to pose_distance") {
  std::mt19937_64 rng(23);
  auto a = random_landmarks(rng, 0);
  CHECK(lip_distance(a, a) == doctest::Approx(0.0));

  auto b = a;
  for (int i = 60; i < 68; ++i) b.points[i].y += 0.02;  // open the mouth, chin unchanged
  CHECK(lip_distance(a, b) == doctest::Approx(0.02));
  CHECK(pose_distance(a, b) == doctest::Approx(0.0));

  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_landmarks(rng, 0);
    auto y = random_landmarks(rng, 1);
    CHECK(lip_distance(x, y) == doctest::Approx(oracle_group_dist(x, y, 60, 68)));
  }
}

TEST_CASE("distances satisfy metric properties on random triples") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_landmarks(rng, 0);
    auto b = random_landmarks(rng, 1);
    auto c = random_landmarks(rng, 2);
    CHECK(pose_distance(a, b) == doctest::Approx(pose_distance(b, a)));
    CHECK(lip_distance(a, b) == doctest::Approx(lip_distance(b, a)));
    CHECK(pose_distance(a, b) + pose_distance(b, c) >= pose_distance(a, c) - 1e-12);
    CHECK(lip_distance(a, b) + lip_distance(b, c) >= lip_distance(a, c) - 1e-12);
    CHECK(pose_distance(a, b) > 0.0);  // random sets virtually never coincide
  }
}

TEST_CASE("top_k_pose_set tie-break and selection") {
  SisConfig cfg;
  cfg.exclude_target = true;

  // constant-pose track: every candidate ties, smaller index wins
  std::mt19937_64 rng(25);
  auto proto = random_landmarks(rng, 0);
  std::vector<LandmarkSet> track;
  for (int i = 0; i < 10; ++i) {
    auto s = proto;
    s.frame_index = i;
    track.push_back(s);
  }
  cfg.k_fraction = 0.3;  // ceil(0.3*10) = 3
  CHECK(top_k_pose_set(track, 0, cfg) == std::set<int>{1, 2, 3});

  // one frame matches the target pose exactly
  auto track2 = random_track(rng, 10);
  track2[7] = track2[2];
  track2[7].frame_index = 7;
  cfg.k_fraction = 0.1;  // k = 1
  CHECK(top_k_pose_set(track2, 2, cfg) == std::set<int>{7});

  CHECK_THROWS_AS(top_k_pose_set(std::vector<LandmarkSet>{proto}, 0, cfg), std::invalid_argument);
}

TEST_CASE("top_k_lip_set selects the most distinct mouths") {
  SisConfig cfg;
  std::mt19937_64 rng(26);
  auto proto = random_landmarks(rng, 0);
  std::vector<LandmarkSet> track;
  for (int i = 0; i < 8; ++i) {
    auto s = proto;
    s.frame_index = i;
    track.push_back(s);
  }
  for (int i = 60; i < 68; ++i) track[4].points[i].y += 0.3;  // wide open mouth at frame 4
  cfg.k_fraction = 0.125;  // k = 1
  CHECK(top_k_lip_set(track, 0, cfg) == std::set<int>{4});

  // constant-lip track: ties resolve to smallest indices
  std::vector<LandmarkSet> track3;
  for (int i = 0; i < 8; ++i) {
    auto s = proto;
    s.frame_index = i;
    track3.push_back(s);
  }
  cfg.k_fraction = 0.25;  // k = 2
  CHECK(top_k_lip_set(track3, 5, cfg) == std::set<int>{0, 1});
}

TEST_CASE("top-k selections match the full-sort oracle on random tracks") {
  std::mt19937_64 rng(27);
  SisConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    int n = 5 + static_cast<int>(rng() % 40);
    auto track = random_track(rng, n);
    int target = static_cast<int>(rng() % n);
    cfg.k_fraction = 0.05 + 0.90 * (rng() % 1000) / 1000.0;
    int k = sis_k(cfg, n);
    CHECK(top_k_pose_set(track, target, cfg) ==
          oracle_top_k(track, target, k, true, false, 0, 17));
    CHECK(top_k_lip_set(track, target, cfg) ==
          oracle_top_k(track, target, k, true, true, 60, 68));
  }
}

TEST_CASE("sis_select intersects the two sets") {
  auto track = constructed_track();
  SisConfig cfg;
  cfg.k_fraction = 0.4;  // k = 4 on 10 frames
  auto sel = sis_select(track, 0, cfg);
  CHECK(sel.pose_set == std::set<int>{2, 3, 5, 7});
  CHECK(sel.mouth_set == std::set<int>{3, 6, 7, 9});
  CHECK(sel.final_set == std::set<int>{3, 7});
  CHECK_FALSE(sel.fallback_used);
}

TEST_CASE("sis_select falls back to the pose member with the largest lip distance") {
  // pose top-k and lip top-k engineered to be disjoint
  std::vector<double> chin_pos = {0.0, 0.01, 0.02, 0.5, 0.6, 0.7};
  std::vector<double> lip_pos = {0.0, 0.10, 0.20, 0.8, 0.9, 0.95};
  std::vector<LandmarkSet> track;
  for (int f = 0; f < 6; ++f) {
    LandmarkSet s;
    s.frame_index = f;
    s.groups = LandmarkSet::default68_groups();
    s.points.resize(68, {0.5, 0.5});
    for (int i = 0; i < 17; ++i) s.points[i] = {chin_pos[f], 0.0};
    for (int i = 60; i < 68; ++i) s.points[i] = {lip_pos[f], 0.0};
    track.push_back(std::move(s));
  }
  SisConfig cfg;
  cfg.k_fraction = 1.0 / 3.0;  // k = 2: pose {1,2}, lip {4,5} (frame 5 largest)
  auto sel = sis_select(track, 0, cfg);
  CHECK(sel.pose_set == std::set<int>{1, 2});
  CHECK(sel.mouth_set == std::set<int>{4, 5});
  CHECK(sel.fallback_used);
  CHECK(sel.final_set == std::set<int>{2});  // lip 0.20 beats 0.10 within the pose set
}

TEST_CASE("sis_select with k_fraction=1 returns everything but the target") {
  std::mt19937_64 rng(28);
  auto track = random_track(rng, 12);
  SisConfig cfg;
  cfg.k_fraction = 1.0;
  cfg.exclude_target = true;
  auto sel = sis_select(track, 5, cfg);
  std::set<int> expect;
  for (int i = 0; i < 12; ++i)
    if (i != 5) expect.insert(i);
  CHECK(sel.final_set == expect);
  CHECK_FALSE(sel.fallback_used);
}

TEST_CASE("sis_select is deterministic and k-monotone") {
  std::mt19937_64 rng(29);
  auto track = random_track(rng, 30);
  SisConfig small, big;
  small.k_fraction = 0.2;
  big.k_fraction = 0.5;
  for (int target = 0; target < 30; target += 7) {
    auto a1 = sis_select(track, target, small);
    auto a2 = sis_select(track, target, small);
    CHECK(a1.final_set == a2.final_set);
    CHECK(a1.pose_set == a2.pose_set);

    auto b = sis_select(track, target, big);
    CHECK(std::includes(b.pose_set.begin(), b.pose_set.end(), a1.pose_set.begin(),
                        a1.pose_set.end()));
    CHECK(std::includes(b.mouth_set.begin(), b.mouth_set.end(), a1.mouth_set.begin(),
                        a1.mouth_set.end()));
    if (!a1.fallback_used && !b.fallback_used)
      CHECK(std::includes(b.final_set.begin(), b.final_set.end(), a1.final_set.begin(),
                          a1.final_set.end()));
  }
}

TEST_CASE("every non-fallback member is in both top-k sets per the sort oracle") {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 10 + static_cast<int>(rng() % 30);
    auto track = random_track(rng, n);
    int target = static_cast<int>(rng() % n);
    SisConfig cfg;
    cfg.k_fraction = 0.5;
    auto sel = sis_select(track, target, cfg);
    if (sel.fallback_used) continue;
    int k = sis_k(cfg, n);
    auto pose_oracle = oracle_top_k(track, target, k, true, false, 0, 17);
    auto lip_oracle = oracle_top_k(track, target, k, true, true, 60, 68);
    for (int f : sel.final_set) {
      CHECK(pose_oracle.count(f) == 1);
      CHECK(lip_oracle.count(f) == 1);
    }
  }
}

TEST_CASE("LandmarkSet validation rejects broken invariants") {
  std::mt19937_64 rng(31);
  auto good = random_landmarks(rng, 0);
  CHECK_NOTHROW(good.validate());

  auto nan = good;
  nan.points[3].x = std::nan("");
  CHECK_THROWS_AS(nan.validate(), std::invalid_argument);

  auto overlap = good;
  overlap.groups["eyes"] = {10, 20};  // collides with chin 0..17
  CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);

  auto missing = good;
  missing.groups.erase("inner_lip");
  CHECK_THROWS_AS(missing.validate(), std::invalid_argument);

  auto oob = good;
  oob.groups["chin"] = {0, 200};
  CHECK_THROWS_AS(oob.validate(), std::invalid_argument);
}
