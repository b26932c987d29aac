// Command-line driver: run odometry, generate synthetic datasets, score trajectories.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "adalio/adalio.hpp"

namespace {

using namespace adalio;

enum ExitCode : int { kOk = 0, kInputError = 1, kNumericalError = 2, kConfigError = 3 };

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kConfig:
      return kConfigError;
    case ErrorCode::kNumericalFailure:
      return kNumericalError;
    default:
      return kInputError;
  }
}

struct RunArgs {
  std::string config, scans, imu, out_traj, out_log;
  bool no_adaptive = false;
};

int cmd_run(const RunArgs& a) {
  OdometryConfig cfg = load_config(a.config);
  // Command-line flags take precedence over the configuration file.
  if (a.no_adaptive) cfg.adaptive_enabled = false;

  const auto scans = read_scan_directory(a.scans);
  const auto imu = read_imu_file(a.imu);
  std::cerr << "adalio run: " << scans.size() << " scans, " << imu.size() << " IMU samples, adaptive "
            << (cfg.adaptive_enabled ? "on" : "off") << '\n';

  std::ofstream traj(a.out_traj);
  if (!traj) throw Error(ErrorCode::kIo, "cannot write " + a.out_traj);
  std::ofstream log(a.out_log);
  if (!log) throw Error(ErrorCode::kIo, "cannot write " + a.out_log);

  std::size_t failures = 0, degenerate = 0;
  Sinks sinks{&traj, &log, [&](const FrameResult& r) {
                if (r.flags.numerical_failure) ++failures;
                if (r.mode == Mode::kDegenerate) ++degenerate;
                if ((r.frame + 1) % 50 == 0) std::cerr << "  frame " << r.frame + 1 << "/" << scans.size() << '\n';
              }};

  run_sequence(cfg, scans, imu, sinks);
  traj.flush();
  log.flush();
  if (!traj || !log) throw Error(ErrorCode::kIo, "failed writing outputs");

  std::cerr << "adalio run: done, " << degenerate << " degenerate-mode frames, " << failures
            << " numerical failures\n";
  if (failures > 0) {
    std::cerr << "adalio run: numerical failure in " << failures << " frame(s)\n";
    return kNumericalError;
  }
  return kOk;
}

struct SynthArgs {
  std::string scene, traj_preset, out_dir;
  std::uint64_t seed = 1;
  std::size_t frames = 200;
  double scan_noise = 0.01;
  double corridor_width = 1.2;
};

int cmd_synth(const SynthArgs& a) {
  const std::string preset = a.traj_preset.empty() ? a.scene : a.traj_preset;
  if (!a.scene.empty() && !a.traj_preset.empty() && a.scene != a.traj_preset) {
    throw Error(ErrorCode::kInput, "scene '" + a.scene + "' has no trajectory preset '" + a.traj_preset + "'");
  }
  synth::PresetOptions opt;
  opt.seed = a.seed;
  opt.frames = a.frames;
  opt.scan_noise = a.scan_noise;
  opt.corridor_width = a.corridor_width;
  const synth::Dataset ds = synth::make_dataset(preset, opt);
  synth::write_dataset(a.out_dir, ds, synth::dataset_config(ds));
  std::cerr << "adalio synth: " << preset << ", " << ds.scans.size() << " scans, " << ds.imu.size()
            << " IMU samples, " << ds.markers.size() << " markers -> " << a.out_dir << '\n';
  return kOk;
}

struct ScoreArgs {
  std::string traj, markers, align = "none", out_csv;
};

int cmd_score(const ScoreArgs& a) {
  const auto traj = read_trajectory_tum(a.traj);
  const auto markers = read_markers_file(a.markers);
  const Alignment al = a.align == "rigid" ? Alignment::kRigid : Alignment::kNone;
  const ScoreReport r = score_trajectory(traj, markers, al);
  print_score_table(std::cout, r);
  const std::string csv = a.out_csv.empty() ? a.traj + ".score.csv" : a.out_csv;
  std::ofstream os(csv);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + csv);
  write_score_csv(os, r);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-inertial odometry with degeneracy-adaptive parameters"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run odometry over a scan directory and IMU stream");
  run_cmd->add_option("--config", run.config, "Configuration file (key = value)")->required();
  run_cmd->add_option("--scans", run.scans, "Directory of *.bin scans")->required();
  run_cmd->add_option("--imu", run.imu, "IMU CSV")->required();
  run_cmd->add_option("--out-traj", run.out_traj, "Output TUM trajectory")->required();
  run_cmd->add_option("--out-log", run.out_log, "Output per-frame CSV log")->required();
  run_cmd->add_flag("--no-adaptive", run.no_adaptive, "Always use the general parameter profile");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--scene", synth_args.scene, "Scene preset")
      ->check(CLI::IsMember(synth::preset_names()));
  synth_cmd->add_option("--traj-preset", synth_args.traj_preset, "Trajectory preset (defaults to the scene)")
      ->check(CLI::IsMember(synth::preset_names()));
  synth_cmd->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed");
  synth_cmd->add_option("--frames", synth_args.frames, "Number of scans")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--scan-noise", synth_args.scan_noise, "Per-point range noise sigma [m]")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--corridor-width", synth_args.corridor_width, "room-corridor-room corridor width [m]")
      ->check(CLI::PositiveNumber);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score a trajectory against marker positions");
  score_cmd->add_option("--traj", score.traj, "TUM trajectory")->required();
  score_cmd->add_option("--markers", score.markers, "Markers CSV (id,x,y,z)")->required();
  score_cmd->add_option("--align", score.align, "none | rigid")->check(CLI::IsMember({"none", "rigid"}));
  score_cmd->add_option("--out-csv", score.out_csv, "Score CSV (default: <traj>.score.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*synth_cmd) {
      if (synth_args.scene.empty() && synth_args.traj_preset.empty()) {
        std::cerr << "adalio synth: --scene or --traj-preset is required\n";
        return kConfigError;
      }
      return cmd_synth(synth_args);
    }
    if (*score_cmd) return cmd_score(score);
  } catch (const Error& e) {
    std::cerr << "adalio: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "adalio: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}
