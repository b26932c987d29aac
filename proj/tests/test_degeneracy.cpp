#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace adalio;
using namespace adalio::testing;

namespace {

// n points, the first `near` of them within the 5 m radius.
std::vector<Point3> cloud_with(std::size_t n, std::size_t near, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> r_near(0.5, 4.5), r_far(5.5, 20.0);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 dir = random_vec(rng, 1.0).normalized();
    out.emplace_back(dir * (i < near ? r_near(rng) : r_far(rng)));
  }
  return out;
}

DegeneracyReport run_raw(const std::vector<Point3>& cloud, const DetectorConfig& cfg = {}) {
  return detect_degeneracy(cloud, cfg, DegeneracyReport{});
}

}  // namespace

TEST(SelectParams, ProfilesAreExact) {
  DegeneracyReport r;
  r.decision = Mode::kGeneral;
  const ParamProfile g = select_params(r, ProfilePair{});
  EXPECT_EQ(g.voxel_size, 0.2);
  EXPECT_EQ(g.search_radius, 3.0);
  EXPECT_EQ(g.residual_margin, 0.05);
  EXPECT_EQ(g.mode, Mode::kGeneral);
  r.decision = Mode::kDegenerate;
  const ParamProfile d = select_params(r, ProfilePair{});
  EXPECT_EQ(d.voxel_size, 0.1);
  EXPECT_EQ(d.search_radius, 2.0);
  EXPECT_EQ(d.residual_margin, 0.025);
  EXPECT_EQ(d.mode, Mode::kDegenerate);
}

TEST(SelectParams, Deterministic) {
  DegeneracyReport r;
  r.decision = Mode::kDegenerate;
  EXPECT_EQ(select_params(r, ProfilePair{}), select_params(r, ProfilePair{}));
}

TEST(ValidateProfiles, DegenerateMustBeStrictlyFiner) {
  EXPECT_NO_THROW(validate_profiles(ProfilePair{}));
  ProfilePair p;
  p.degenerate.search_radius = p.general.search_radius;
  EXPECT_THROW(validate_profiles(p), Error);
  p = ProfilePair{};
  p.general.residual_margin = 0.0;
  EXPECT_THROW(validate_profiles(p), Error);
}

TEST(DetectDegeneracy, BothConditionsAreRequired) {
  std::mt19937_64 rng(51);
  EXPECT_EQ(run_raw(cloud_with(1199, 600, rng)).raw_decision, Mode::kGeneral);    // fraction ~0.5
  EXPECT_EQ(run_raw(cloud_with(1199, 1000, rng)).raw_decision, Mode::kDegenerate);
  EXPECT_EQ(run_raw(cloud_with(1200, 1200, rng)).raw_decision, Mode::kGeneral);   // count at threshold
  EXPECT_EQ(run_raw(cloud_with(1000, 800, rng)).raw_decision, Mode::kDegenerate);  // fraction exactly 0.8
  EXPECT_EQ(run_raw(cloud_with(1000, 799, rng)).raw_decision, Mode::kGeneral);
}

TEST(DetectDegeneracy, ReportsCountAndFraction) {
  std::mt19937_64 rng(52);
  const auto r = run_raw(cloud_with(1000, 250, rng));
  EXPECT_EQ(r.downsampled_count, 1000u);
  EXPECT_DOUBLE_EQ(r.near_origin_fraction, 0.25);
}

TEST(DetectDegeneracy, EmptyScanHoldsTheDecision) {
  DegeneracyReport prev;
  prev.decision = Mode::kDegenerate;
  prev.opposite_streak = 1;
  const auto r = detect_degeneracy(std::vector<Point3>{}, DetectorConfig{}, prev);
  EXPECT_TRUE(r.empty_scan);
  EXPECT_EQ(r.decision, Mode::kDegenerate);
  EXPECT_EQ(r.opposite_streak, 1u);
}

TEST(DetectDegeneracy, HysteresisNeedsConsecutiveVerdicts) {
  std::mt19937_64 rng(53);
  const auto corridor = cloud_with(600, 570, rng);
  const auto open = cloud_with(5000, 1500, rng);
  DegeneracyReport r;
  r = detect_degeneracy(corridor, DetectorConfig{}, r);
  r = detect_degeneracy(corridor, DetectorConfig{}, r);
  EXPECT_EQ(r.decision, Mode::kGeneral);
  r = detect_degeneracy(open, DetectorConfig{}, r);  // breaks the streak
  r = detect_degeneracy(corridor, DetectorConfig{}, r);
  r = detect_degeneracy(corridor, DetectorConfig{}, r);
  EXPECT_EQ(r.decision, Mode::kGeneral);
  r = detect_degeneracy(corridor, DetectorConfig{}, r);
  EXPECT_EQ(r.decision, Mode::kDegenerate);
}

TEST(DetectDegeneracy, DecisionFollowsRunsOfRawVerdicts) {
  std::mt19937_64 rng(54);
  const auto corridor = cloud_with(600, 570, rng);
  const auto open = cloud_with(5000, 1500, rng);
  std::bernoulli_distribution coin(0.7);
  for (std::size_t h : {1u, 2u, 3u, 5u}) {
    DetectorConfig cfg;
    cfg.hysteresis_frames = h;
    DegeneracyReport r;
    std::vector<Mode> raw, decided;
    bool degenerate_side = false;
    for (int i = 0; i < 400; ++i) {
      if (!coin(rng)) degenerate_side = !degenerate_side;
      r = detect_degeneracy(degenerate_side ? corridor : open, cfg, r);
      raw.push_back(r.raw_decision);
      decided.push_back(r.decision);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const Mode before = i == 0 ? Mode::kGeneral : decided[i - 1];
      if (decided[i] == before) continue;
      // A switch needs the last h raw verdicts to agree with the new mode.
      ASSERT_GE(i + 1, h);
      for (std::size_t j = i + 1 - h; j <= i; ++j) EXPECT_EQ(raw[j], decided[i]) << "h " << h << " frame " << i;
    }
    for (std::size_t i = h - 1; i < raw.size(); ++i) {
      bool run = true;
      for (std::size_t j = i + 1 - h; j <= i; ++j) run = run && raw[j] == raw[i];
      if (run) {
        EXPECT_EQ(decided[i], raw[i]) << "h " << h << " frame " << i;
      }
    }
  }
}

TEST(DetectDegeneracy, InvariantUnderRotationAboutTheSensor) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cloud = cloud_with(1100, 900 + trial, rng);
    const Rotation R = random_rotation(rng);
    std::vector<Point3> rotated;
    for (const auto& p : cloud) rotated.push_back(p.with_position(R * p.position()));
    const auto a = run_raw(cloud), b = run_raw(rotated);
    EXPECT_EQ(a.downsampled_count, b.downsampled_count);
    EXPECT_EQ(a.near_origin_fraction, b.near_origin_fraction);
    EXPECT_EQ(a.raw_decision, b.raw_decision);
  }
}

TEST(DetectDegeneracy, MonotoneInThresholds) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cloud = cloud_with(500 + 30 * trial, 400 + 25 * trial, rng);
    DetectorConfig lo, hi;
    hi.count_threshold = lo.count_threshold + 500;
    hi.near_origin_fraction_threshold = lo.near_origin_fraction_threshold - 0.1;
    // Looser thresholds can only add degenerate verdicts.
    if (run_raw(cloud, lo).raw_decision == Mode::kDegenerate) {
      EXPECT_EQ(run_raw(cloud, hi).raw_decision, Mode::kDegenerate);
    }
  }
}

TEST(DetectDegeneracy, FarPointsOnlyLowerTheFraction) {
  std::mt19937_64 rng(57);
  auto cloud = cloud_with(800, 700, rng);
  double last = run_raw(cloud).near_origin_fraction;
  for (int i = 0; i < 20; ++i) {
    const auto extra = cloud_with(20, 0, rng);
    cloud.insert(cloud.end(), extra.begin(), extra.end());
    const double f = run_raw(cloud).near_origin_fraction;
    EXPECT_LT(f, last);
    last = f;
  }
}

TEST(DetectDegeneracy, SyntheticRoomAndCorridorScans) {
  synth::PresetOptions opt;
  opt.frames = 12;
  for (const std::string name : {"room", "corridor"}) {
    const auto ds = synth::make_dataset(name, opt);
    DegeneracyReport r;
    std::size_t first_degenerate = ds.scans.size();
    for (std::size_t k = 0; k < ds.scans.size(); ++k) {
      const auto pts = voxel_downsample(ds.scans[k].points, 0.2);
      r = detect_degeneracy(pts, DetectorConfig{}, r);
      if (name == "room") {
        EXPECT_EQ(r.raw_decision, Mode::kGeneral) << "frame " << k << " count " << r.downsampled_count;
      } else {
        EXPECT_EQ(r.raw_decision, Mode::kDegenerate) << "frame " << k << " count " << r.downsampled_count;
        EXPECT_GE(r.near_origin_fraction, 0.9);
      }
      if (r.decision == Mode::kDegenerate && first_degenerate == ds.scans.size()) first_degenerate = k;
    }
    if (name == "corridor") {
      EXPECT_EQ(first_degenerate, DetectorConfig{}.hysteresis_frames - 1);
    }
  }
}
