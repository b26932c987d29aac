#include <array>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace adalio;
using namespace adalio::testing;

namespace {

double trace(const ErrorCov& P) { return P.trace(); }

ErrorCov prior_cov(double sigma_rot, double sigma_pos) {
  ErrorVec var;
  var << Vec3::Constant(sigma_rot * sigma_rot), Vec3::Constant(sigma_pos * sigma_pos), Vec3::Constant(1e-2),
      Vec3::Constant(1e-6), Vec3::Constant(1e-3), Vec3::Constant(1e-4);
  return var.asDiagonal();
}

std::vector<Point3> to_body(const std::vector<Point3>& world, const Pose& T, double range) {
  const Pose inv = T.inverse();
  std::vector<Point3> out;
  for (const auto& p : world) {
    if ((p.position() - T.translation).norm() < range) out.push_back(transform_point(inv, p));
  }
  return out;
}

VoxelMap map_of(const std::vector<Point3>& pts) {
  VoxelMap m;
  m.insert_scan(pts);
  return m;
}

std::vector<ImuSample> rest_samples(std::mt19937_64& rng, std::size_t n, const Vec3& bg, const Vec3& ba, double sg,
                                    double sa) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<ImuSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({0.005 * static_cast<double>(i), bg + sg * Vec3(N(rng), N(rng), N(rng)),
                   Vec3(0, 0, 9.81) + ba + sa * Vec3(N(rng), N(rng), N(rng))});
  }
  return out;
}

}  // namespace

TEST(ForwardPropagate, StationaryEquilibrium) {
  std::mt19937_64 rng(41);
  NavState s;
  s.rotation = random_rotation(rng);
  s.position = Vec3(1, 2, 3);
  s.bias_gyro = Vec3(0.01, -0.02, 0.005);
  s.bias_accel = Vec3(0.1, 0.05, -0.2);
  const ErrorCov P = prior_cov(1e-3, 1e-3);
  const ImuSample imu{0.0, s.bias_gyro, s.rotation.inverse() * (-s.gravity) + s.bias_accel};
  const auto [next, next_cov] = forward_propagate(s, P, imu, 0.01, NoiseParams{});
  EXPECT_NEAR(next.t, s.t + 0.01, 1e-15);
  EXPECT_TRUE(next.rotation.is_approx(s.rotation, 1e-15));
  EXPECT_LT((next.position - s.position).norm(), 1e-14);
  EXPECT_LT(next.velocity.norm(), 1e-14);
  EXPECT_EQ(next.bias_gyro, s.bias_gyro);
  EXPECT_EQ(next.bias_accel, s.bias_accel);
  EXPECT_EQ(next.gravity, s.gravity);
  EXPECT_GT(trace(next_cov), trace(P));
}

TEST(ForwardPropagate, PureRotationMatchesClosedForm) {
  NavState s;
  ErrorCov P = prior_cov(1e-3, 1e-3);
  const ImuSample imu{0.0, Vec3(0, 0, std::numbers::pi / 2), Vec3(0, 0, 9.81)};
  for (int i = 0; i < 100; ++i) std::tie(s, P) = forward_propagate(s, P, imu, 0.01, NoiseParams{});
  const Rotation oracle(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ())));
  EXPECT_LT(so3_log(oracle.inverse() * s.rotation).norm(), 1e-3);
  const Mat3 R = s.rotation.matrix();
  EXPECT_NEAR(std::atan2(R(1, 0), R(0, 0)), std::numbers::pi / 2, 1e-3);
  EXPECT_LT(s.position.norm(), 1e-9);
}

TEST(ForwardPropagate, FreeFall) {
  NavState s;
  ErrorCov P = prior_cov(1e-3, 1e-3);
  const ImuSample imu{0.0, Vec3::Zero(), Vec3::Zero()};
  for (int i = 0; i < 100; ++i) std::tie(s, P) = forward_propagate(s, P, imu, 0.01, NoiseParams{});
  EXPECT_LT((s.velocity - Vec3(0, 0, -9.81)).norm(), 1e-6);
  EXPECT_LT((s.position - Vec3(0, 0, -4.905)).norm(), 1e-6);
}

TEST(ForwardPropagate, RejectsGapsAndNonFiniteSamples) {
  const NavState s;
  const ErrorCov P = ErrorCov::Identity();
  const ImuSample ok{0.0, Vec3::Zero(), Vec3(0, 0, 9.81)};
  for (double dt : {0.0, -0.01, 0.1000001, 1.0}) {
    try {
      forward_propagate(s, P, ok, dt, NoiseParams{});
      FAIL() << "dt " << dt;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kPropagationGap);
    }
  }
  ImuSample bad = ok;
  bad.gyro.x() = std::nan("");
  try {
    forward_propagate(s, P, bad, 0.01, NoiseParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInput);
  }
}

TEST(PropagateTo, HistorySpansTheInterval) {
  NavState s;
  s.t = 1.0;
  std::vector<ImuSample> imu;
  for (int i = 1; i <= 20; ++i) imu.push_back({1.0 + 0.005 * i, Vec3(0, 0, 0.5), Vec3(0.2, 0, 9.81)});
  const ImuSample prev{1.0, Vec3(0, 0, 0.5), Vec3(0.2, 0, 9.81)};
  const Propagation p = propagate_to(s, prior_cov(1e-3, 1e-3), prev, imu, 1.13, NoiseParams{});
  ASSERT_GE(p.history.size(), 2u);
  EXPECT_DOUBLE_EQ(p.history.front().t, 1.0);
  EXPECT_DOUBLE_EQ(p.history.back().t, 1.13);
  EXPECT_DOUBLE_EQ(p.state.t, 1.13);
  for (std::size_t i = 1; i < p.history.size(); ++i) EXPECT_GT(p.history[i].t, p.history[i - 1].t);
  EXPECT_DOUBLE_EQ(p.last_sample.t, imu.back().t);
}

TEST(PropagateTo, NoiselessStreamReproducesWaypoints) {
  const ReplayError e = imu_replay_error(preset_waypoints("room"), 200.0);
  EXPECT_LT(e.position, 1e-3);
  EXPECT_LT(e.rotation, 1e-3);
}

TEST(UndistortScan, StationaryHistoryIsIdentity) {
  std::mt19937_64 rng(42);
  const Pose T = random_pose(rng, 3.0);
  const std::vector<PoseStamp> history{{0.0, T}, {0.05, T}, {0.1, T}};
  LidarScan scan{{}, 0.0, 0.1};
  for (int i = 0; i < 100; ++i) scan.points.emplace_back(random_vec(rng, 10.0), 1.0, 0.001 * i);
  const LidarScan out = undistort_scan(scan, T, history);
  ASSERT_EQ(out.points.size(), scan.points.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    EXPECT_LT((out.points[i].position() - scan.points[i].position()).norm(), 1e-12);
  }
}

TEST(UndistortScan, ConstantVelocity) {
  const std::vector<PoseStamp> history{{0.0, Pose::identity()}, {0.1, Pose{Rotation(), Vec3(0.1, 0, 0)}}};
  const LidarScan scan{{Point3(0, 0, 0, 0, 0.0)}, 0.0, 0.1};
  const LidarScan out = undistort_scan(scan, history.back().pose, history);
  EXPECT_LT((out.points[0].position() - Vec3(-0.1, 0, 0)).norm(), 1e-12);
}

TEST(UndistortScan, ConstantYawRateMatchesScrewMotion) {
  const double rate = std::numbers::pi;
  auto pose_at = [&](double t) { return Pose{so3_exp(Vec3(0, 0, rate * t)), Vec3::Zero()}; };
  std::vector<PoseStamp> history;
  for (int i = 0; i <= 10; ++i) history.push_back({0.01 * i, pose_at(0.01 * i)});
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> U(0.0, 0.1);
  LidarScan scan{{}, 0.0, 0.1};
  scan.points.emplace_back(Vec3(2, 1, 0.5), 0.0, 0.0);
  for (int i = 0; i < 200; ++i) scan.points.emplace_back(random_vec(rng, 5.0), 0.0, U(rng));
  const LidarScan out = undistort_scan(scan, pose_at(0.1), history);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const double tau = scan.points[i].time_offset();
    const Vec3 oracle = Eigen::AngleAxisd(-rate * (0.1 - tau), Vec3::UnitZ()) * scan.points[i].position();
    EXPECT_LT((out.points[i].position() - oracle).norm(), 1e-9);
  }
}

TEST(UndistortScan, PointOutsideHistoryIsAnError) {
  const std::vector<PoseStamp> history{{0.05, Pose::identity()}, {0.1, Pose::identity()}};
  const LidarScan scan{{Point3(1, 0, 0, 0, 0.0)}, 0.0, 0.1};
  try {
    undistort_scan(scan, Pose::identity(), history);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndistortCoverage);
  }
}

TEST(IteratedUpdate, EmptyMapBootstraps) {
  const std::vector<Point3> scan{Point3(1, 0, 0)};
  NavState s;
  s.position = Vec3(1, 2, 3);
  const UpdateResult r = iterated_update(s, prior_cov(0.01, 0.1), scan, VoxelMap{}, ParamProfile::general(), {});
  EXPECT_TRUE(r.stats.bootstrap);
  EXPECT_EQ(r.state.position, s.position);
}

TEST(IteratedUpdate, ZeroResidualFixedPoint) {
  const auto room = synth::generate_scene(synth::SceneSpec{synth::Room{10, 10, 3}, 20.0, 0.0, 1});
  const VoxelMap map = map_of(room);
  NavState truth;
  truth.rotation = so3_exp(Vec3(0.02, -0.01, 0.4));
  truth.position = Vec3(0.5, -0.5, 1.5);
  // Neighbourhoods that straddle an edge fit a slightly tilted plane, so only
  // points at least 0.5 m from every other face enter the scan.
  std::vector<Point3> interior;
  for (const auto& p : room) {
    const Vec3 x = p.position();
    std::array<double, 6> d{5 - x.x(), 5 + x.x(), 5 - x.y(), 5 + x.y(), x.z(), 3 - x.z()};
    std::sort(d.begin(), d.end());
    if (d[1] >= 0.5) interior.push_back(p);
  }
  const auto scan = to_body(interior, truth.pose(), 6.0);
  ASSERT_GT(scan.size(), 1000u);
  const UpdateResult r = iterated_update(truth, prior_cov(0.05, 0.2), scan, map, ParamProfile::general(), {});
  ASSERT_FALSE(r.stats.correction_norms.empty());
  EXPECT_LT(r.stats.correction_norms.front(), 1e-6);
  EXPECT_TRUE(r.stats.converged);
}

TEST(IteratedUpdate, RecoversPerturbedPoseInRoom) {
  // 10 x 10 x 3 m box, 320 m^2 of surface at 62.5 points/m^2: 20k map points.
  const auto room = synth::generate_scene(synth::SceneSpec{synth::Room{10, 10, 3}, 62.5, 0.0, 1});
  ASSERT_EQ(room.size(), 20000u);
  const VoxelMap map = map_of(room);
  const auto scan_world = synth::generate_scene(synth::SceneSpec{synth::Room{10, 10, 3}, 62.5, 0.0, 2});
  std::mt19937_64 rng(44);
  const double deg = std::numbers::pi / 180.0;
  for (int trial = 0; trial < 5; ++trial) {
    NavState truth;
    truth.rotation = so3_exp(Vec3(0.02, -0.03, 0.5 * trial));
    truth.position = Vec3(0.5, -0.3, 1.4) + random_vec(rng, 1.0);
    const auto scan = voxel_downsample(to_body(scan_world, truth.pose(), 8.0), 0.2);
    ErrorVec dx = ErrorVec::Zero();
    dx.segment<3>(kRot) = random_vec(rng, 1.0).normalized() * 2.0 * deg;
    dx.segment<3>(kPos) = random_vec(rng, 1.0).normalized() * 0.1;
    const NavState prior = truth.boxplus(dx);
    const UpdateResult r = iterated_update(prior, prior_cov(0.05, 0.2), scan, map, ParamProfile::general(), {});
    EXPECT_LE(r.stats.iterations, 4u);
    EXPECT_LT((r.state.position - truth.position).norm(), 0.01) << "trial " << trial;
    EXPECT_LT(so3_log(truth.rotation.inverse() * r.state.rotation).norm(), 0.2 * deg) << "trial " << trial;
  }
}

TEST(IteratedUpdate, CorridorWallsLeaveTheAxisUnobserved) {
  const synth::Corridor corridor{1.5, 2.5, 30.0};
  auto walls = [&](std::uint64_t seed) {
    std::vector<Point3> out;
    for (const auto& p : synth::generate_scene(synth::SceneSpec{corridor, 60.0, 0.0, seed})) {
      if (std::abs(std::abs(p.y()) - 0.75) < 1e-9) out.push_back(p);
    }
    return out;
  };
  const VoxelMap map = map_of(walls(1));
  NavState truth;
  truth.position = Vec3(15.0, 0.1, 1.2);
  const auto scan = voxel_downsample(to_body(walls(2), truth.pose(), 8.0), 0.2);
  ErrorVec dx = ErrorVec::Zero();
  dx.segment<3>(kPos) = Vec3(0.1, 0.1, 0.0);
  const UpdateResult r = iterated_update(truth.boxplus(dx), prior_cov(0.05, 0.2), scan, map,
                                         ParamProfile::general(), {});
  const Vec3 err = r.state.position - truth.position;
  EXPECT_NEAR(err.x(), 0.1, 1e-3);  // along the axis: unchanged
  EXPECT_LT(std::abs(err.y()), 0.01);  // across the walls: corrected
}

TEST(InitializeFromRest, ExactLevelData) {
  const std::vector<ImuSample> s(200, ImuSample{0.0, Vec3::Zero(), Vec3(0, 0, 9.81)});
  const auto [state, cov] = initialize_from_rest(s, InitConfig{});
  EXPECT_LT((state.gravity - Vec3(0, 0, -9.81)).norm(), 1e-12);
  EXPECT_LT(state.bias_gyro.norm(), 1e-15);
  EXPECT_LT(state.bias_accel.norm(), 1e-12);
  EXPECT_TRUE(state.rotation.is_approx(Rotation()));
  EXPECT_EQ(state.position, Vec3::Zero());
}

TEST(InitializeFromRest, ConstantGyroIsTheBias) {
  const std::vector<ImuSample> s(200, ImuSample{0.0, Vec3(0.01, 0, 0), Vec3(0, 0, 9.81)});
  EXPECT_LT((initialize_from_rest(s, InitConfig{}).first.bias_gyro - Vec3(0.01, 0, 0)).norm(), 1e-15);
}

TEST(InitializeFromRest, MonteCarloBiasesWithinThreeSigma) {
  const double sg = 0.001, sa = 0.01;
  const std::size_t n = 400;
  const Vec3 bg(0.003, -0.002, 0.001);
  const Vec3 ba(0.0, 0.0, 0.05);  // only the vertical component is observable at rest
  const double tol_g = 3.0 * sg / std::sqrt(static_cast<double>(n));
  const double tol_a = 3.0 * sa / std::sqrt(static_cast<double>(n));
  int checks = 0, outside = 0;
  Vec3 mean_err_g = Vec3::Zero();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto [state, cov] = initialize_from_rest(rest_samples(rng, n, bg, ba, sg, sa), InitConfig{});
    const Vec3 eg = state.bias_gyro - bg;
    mean_err_g += eg / 50.0;
    for (int a = 0; a < 3; ++a, ++checks) outside += std::abs(eg(a)) > tol_g;
    ++checks;
    outside += std::abs(state.bias_accel.z() - ba.z()) > tol_a;
  }
  EXPECT_LE(outside, checks / 50);  // 3-sigma bound: about 0.3% expected outside
  EXPECT_LT(mean_err_g.norm(), tol_g);
}

TEST(InitializeFromRest, RejectsMotionAndShortWindows) {
  std::mt19937_64 rng(45);
  const auto shaking = rest_samples(rng, 200, Vec3::Zero(), Vec3::Zero(), 0.0, 1.0);
  try {
    initialize_from_rest(shaking, InitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotAtRest);
  }
  const std::vector<ImuSample> few(10, ImuSample{0.0, Vec3::Zero(), Vec3(0, 0, 9.81)});
  EXPECT_THROW(initialize_from_rest(few, InitConfig{}), Error);
}

TEST(Covariance, StaysSymmetricPsdUnderRandomCycles) {
  const CovarianceStress r = covariance_stress(46, 2000);
  EXPECT_GE(r.min_eigenvalue, -1e-9);
  EXPECT_LE(r.max_asymmetry, 1e-9);
  EXPECT_GT(r.updates_with_correspondences, 1000u);
}
