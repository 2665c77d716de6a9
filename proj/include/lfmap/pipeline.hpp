#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lfmap/dataset.hpp"
#include "lfmap/frame_graph.hpp"
#include "lfmap/planner.hpp"
#include "lfmap/registration.hpp"
#include "lfmap/sampler.hpp"

namespace lfmap {

/// Every knob of a mapping run in one structure, so that a run is fully
/// described by (config, input). Serializes to a flat key=value file and
/// loads back to an identical configuration.
struct RunConfig {
  std::uint64_t seed = 1;
  int max_frames = 0;              // observation cap; 0 keeps the whole input
  int train_every = 5;             // train once per this many observations
  // Training bursts at a frame's first observation. Each burst restarts the
  // convergence window, so a fresh field trains well past the first loss
  // plateau before the next observation registers against it.
  int bootstrap_rounds = 8;
  int stride = 8;                  // backprojection grid stride, pixels
  double voxel_size = 0.1;         // feature-store voxel edge, m
  int neighbor_count = 6;          // k nearest features per query
  std::size_t keypoint_count = 512;  // revisit-check subsample per frame

  SamplerConfig sampler;
  FieldConfig field;
  RegistrationConfig registration;
  SpawnPolicy spawn;
  LoopConfig loop;
  PlannerConfig planner;
};

/// Throughput preset for desk-scale sequences on one core: stride 8,
/// registration over 2048 points capped at 100 field iterations per burst.
RunConfig desk_preset();
/// Full-quality preset: stride 4, registration over 4096 points, field
/// bursts up to 300 iterations.
RunConfig full_preset();
/// "desk" or "paper" (the full-quality preset's CLI name); throws
/// std::invalid_argument otherwise.
RunConfig preset_by_name(const std::string& name);

/// Writes the flat key=value form; keys are grouped per module and each
/// carries its notation in a trailing comment.
void save_config(const RunConfig& cfg, const std::string& path);
/// Parses a file written by save_config. Unknown keys, malformed lines, and
/// unreadable files all throw std::runtime_error; save(load(save(x))) is
/// byte-identical to save(x).
RunConfig load_config(const std::string& path);

/// Per-stage wall-clock milliseconds for one observation (or totals).
struct StageTimings {
  double sampling_ms = 0.0;      // backprojection + training-sample draws
  double training_ms = 0.0;      // field optimization + consolidation
  double registration_ms = 0.0;  // pose refinement
  double total_ms = 0.0;         // whole observation, >= the three above
};

/// What happened at one observation index.
struct ObservationRecord {
  int index = 0;
  double timestamp = 0.0;
  int frame_id = 0;
  bool skipped = false;   // registration failed; pose not recorded
  bool trained = false;
  bool spawned = false;
  SpawnReason spawn_reason = SpawnReason::kNone;
  int loop_to = -1;       // loop-closure target frame, -1 when none
  RegistrationStatus reg_status = RegistrationStatus::kConverged;
  double reg_rmse = 0.0;
  int reg_iterations = 0;
  std::size_t cloud_points = 0;
  std::size_t new_samples = 0;
  std::size_t map_points = 0;  // active frame's store size afterwards
  StageTimings timings;
};

struct RunReport {
  std::vector<ObservationRecord> observations;
  StageTimings stage_totals;
  double wall_ms = 0.0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  bool degraded = false;  // more than 10% of observations skipped
  std::vector<std::string> notes;
};

/// One tracked pose: local (inside its frame) and composed into the world
/// through the frame anchor.
struct PoseEstimate {
  double timestamp = 0.0;
  int frame_id = 0;
  Pose pose_in_frame;
  Pose world;
};

struct MappingResult {
  FrameGraph graph;
  std::vector<PoseEstimate> trajectory;
  RunReport report;
};

/// Runs the full mapping loop over the source: backproject, register against
/// the active frame's field, insert keypoints, train on cadence, spawn new
/// frames when the policy triggers, and check spawned frames for loop
/// closures. Throws std::invalid_argument for sources with fewer than two
/// observations. Deterministic for a fixed (config, source).
MappingResult run_mapping(const ObservationSource& source, const RunConfig& cfg);

/// sqrt(mean of squares); throws std::invalid_argument on an empty list.
double rmse_of(const std::vector<double>& residuals);

struct AteResult {
  double rmse = 0.0;           // m, after alignment
  std::size_t matches = 0;
  Pose alignment;              // rigid transform applied to the estimate
  std::vector<double> errors;  // per-match translational residuals, m
  std::map<int, double> per_frame;  // local frame id -> RMSE of its matches
};

/// Absolute trajectory error: matches estimate to ground truth by nearest
/// timestamp within 0.02 s (one-to-one, in order), aligns with the
/// closed-form least-squares rigid transform (no scale), and reports the
/// RMSE of the translational residuals, overall and per local frame.
/// Throws std::invalid_argument with fewer than two matches.
AteResult evaluate_ate(const std::vector<PoseEstimate>& estimate,
                       const std::vector<GroundTruthPose>& ground_truth);

struct BenchStat {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct BenchReport {
  int pairs = 0;
  int biased_failures = 0;
  int uniform_failures = 0;
  BenchStat biased_runtime_ms, uniform_runtime_ms;
  BenchStat biased_length, uniform_length;
  // Per-pair ratios over pairs where both runs succeeded: runtime and length
  // are biased/uniform; node_ratio is uniform tree size over biased.
  BenchStat runtime_ratio, length_ratio, node_ratio;
  /// Plain-text table of the numbers above.
  std::string table() const;
};

/// Runs the goal-biased planner and the uniform baseline over `pairs` paired
/// seeds (first_seed, first_seed+1, ...) on the benchmark world and
/// aggregates medians and interquartile ranges.
BenchReport bench_planner(const BenchmarkWorld& bench, const PlannerConfig& cfg,
                          int pairs, std::uint64_t first_seed = 1);

/// Writes "timestamp tx ty tz qx qy qz qw" rows (canonical quaternions,
/// fixed precision: byte-stable across reruns).
void save_trajectory_tum(const std::vector<PoseEstimate>& trajectory,
                         const std::string& path);

/// Per-observation stage table plus the run summary. Wall-clock contents;
/// not expected to be byte-stable.
void save_report(const RunReport& report, const std::string& path);

/// Writes the plot-ready series for a run into dir: trajectory.txt (world
/// poses) and topo_map.txt (nodes + edges). Headers are written even when a
/// series is empty; identical runs produce byte-identical files.
void emit_plots(const MappingResult& result, const std::string& dir);

/// Writes one planner run: "tree <idx> <parent> <x> <y> <z>" rows for the
/// search tree, then "path <x> <y> <z>" rows for the solution.
void emit_plan_plot(const PlanResult& result, const std::string& path);

}  // namespace lfmap
