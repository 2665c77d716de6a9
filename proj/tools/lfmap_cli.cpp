// Command-line front end: maps RGB-D sequences into local-frame maps and
// drives the evaluation utilities (trajectory error, planner benchmark,
// synthetic data, plot export).
//
// Exit codes: 0 success, 1 unexpected error, 2 ingestion/data error,
// 3 degraded mapping run, 4 planning failure.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lfmap/dataset.hpp"
#include "lfmap/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitIngestion = 2;
constexpr int kExitDegraded = 3;
constexpr int kExitPlanning = 4;

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<int> max_frames;
};

lfmap::RunConfig resolve_config(const CommonOpts& opts) {
  lfmap::RunConfig cfg = opts.config_path.empty()
                             ? lfmap::preset_by_name(opts.preset)
                             : lfmap::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.max_frames) cfg.max_frames = *opts.max_frames;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "configuration file (overrides --preset)");
  cmd->add_option("--preset", opts.preset, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", opts.seed, "master RNG seed");
  cmd->add_option("--max-frames", opts.max_frames,
                  "input observation cap, 0 = all");
}

Eigen::Vector3d to_point(const std::vector<double>& v) {
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

int run_map(const std::string& input, const CommonOpts& opts,
            const std::string& out_dir) {
  const lfmap::RunConfig cfg = resolve_config(opts);
  const lfmap::TumSequence seq = lfmap::load_tum(input, cfg.max_frames);
  std::printf("loaded %zu associated frames from %s\n", seq.triples.size(),
              input.c_str());

  const lfmap::MappingResult result =
      lfmap::run_mapping(lfmap::make_source(seq), cfg);

  std::filesystem::create_directories(out_dir);
  lfmap::emit_plots(result, out_dir);
  lfmap::save_report(result.report, out_dir + "/report.txt");
  lfmap::save_config(cfg, out_dir + "/config.ini");

  std::printf("mapped %zu observations (%zu skipped) into %zu local frames, "
              "%zu edges\n",
              result.report.processed + result.report.skipped,
              result.report.skipped, result.graph.frames.size(),
              result.graph.edges.size());
  std::printf("stage totals: sampling %.1f ms, training %.1f ms, "
              "registration %.1f ms, wall %.1f ms\n",
              result.report.stage_totals.sampling_ms,
              result.report.stage_totals.training_ms,
              result.report.stage_totals.registration_ms,
              result.report.wall_ms);

  if (!seq.ground_truth.empty()) {
    try {
      const lfmap::AteResult ate =
          lfmap::evaluate_ate(result.trajectory, seq.ground_truth);
      std::printf("trajectory error: rmse %.4f m over %zu matches\n", ate.rmse,
                  ate.matches);
      for (const auto& [frame_id, rmse] : ate.per_frame)
        std::printf("  frame %d: rmse %.4f m\n", frame_id, rmse);
    } catch (const std::invalid_argument& e) {
      std::printf("trajectory error unavailable: %s\n", e.what());
    }
  }
  std::printf("run written to %s\n", out_dir.c_str());
  return result.report.degraded ? kExitDegraded : kExitOk;
}

int run_eval_ate(const std::string& estimate_path, const std::string& truth_path) {
  const auto estimate_poses = lfmap::load_pose_file(estimate_path);
  const auto truth = lfmap::load_pose_file(truth_path);
  std::vector<lfmap::PoseEstimate> estimate;
  estimate.reserve(estimate_poses.size());
  for (const lfmap::GroundTruthPose& p : estimate_poses)
    estimate.push_back(lfmap::PoseEstimate{p.timestamp, 0, p.pose, p.pose});
  try {
    const lfmap::AteResult ate = lfmap::evaluate_ate(estimate, truth);
    std::printf("rmse %.6f m over %zu matches\n", ate.rmse, ate.matches);
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIngestion;
  }
}

int run_plan(const std::string& world_path, const CommonOpts& opts,
             const std::vector<double>& start_override,
             const std::vector<double>& goal_override, bool baseline,
             const std::string& out_path) {
  const lfmap::RunConfig cfg = resolve_config(opts);
  const lfmap::BenchmarkWorld bench = world_path.empty()
                                          ? lfmap::make_corridor_world()
                                          : lfmap::load_world(world_path);
  const Eigen::Vector3d start =
      start_override.empty() ? bench.start : to_point(start_override);
  const Eigen::Vector3d goal =
      goal_override.empty() ? bench.goal : to_point(goal_override);
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);

  const lfmap::PlanResult result =
      baseline ? lfmap::baseline_plan(start, goal, bench.world, cfg.planner, seed)
               : lfmap::plan(start, goal, bench.world, cfg.planner, seed);
  if (!out_path.empty()) lfmap::emit_plan_plot(result, out_path);
  if (!result.success) {
    std::fprintf(stderr, "planning failed after %d iterations (%d nodes)\n",
                 result.iterations, result.tree_size);
    return kExitPlanning;
  }
  std::printf("path: %zu waypoints, %.3f m, %d iterations, %d nodes, %.1f ms\n",
              result.path.size(), result.length, result.iterations,
              result.tree_size, result.runtime_ms);
  return kExitOk;
}

int run_bench(const std::string& world_path, const CommonOpts& opts, int pairs,
              const std::string& out_path) {
  const lfmap::RunConfig cfg = resolve_config(opts);
  const lfmap::BenchmarkWorld bench = world_path.empty()
                                          ? lfmap::make_corridor_world()
                                          : lfmap::load_world(world_path);
  const lfmap::BenchReport report = lfmap::bench_planner(
      bench, cfg.planner, pairs, opts.seed.value_or(1));
  const std::string table = report.table();
  std::fputs(table.c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    os << table;
    if (!os) throw std::runtime_error("cannot write " + out_path);
    std::printf("table written to %s\n", out_path.c_str());
  }
  return kExitOk;
}

int run_synth(const std::string& scene_name, const std::string& out_dir) {
  const lfmap::SynthScene scene = lfmap::synth_world(scene_name);
  const std::string dir = out_dir.empty() ? scene.name + "_data" : out_dir;
  lfmap::write_synth_dataset(scene, dir);
  std::printf("wrote %zu frames of '%s' to %s\n", scene.trajectory.size(),
              scene.name.c_str(), dir.c_str());
  return kExitOk;
}

/// Re-derives plot-ready column series from a mapping run directory:
/// nodes.txt (id x y z qw qx qy qz), edges.txt (from to dx dy dz loop), and
/// trajectory_xyz.txt (x y z).
int run_export_plots(const std::string& run_dir, const std::string& out_dir) {
  const std::string dir = out_dir.empty() ? run_dir : out_dir;
  std::filesystem::create_directories(dir);

  std::ifstream map_in(run_dir + "/topo_map.txt");
  if (!map_in)
    throw lfmap::IngestionError("missing map file: " + run_dir + "/topo_map.txt");
  std::ofstream nodes(dir + "/nodes.txt");
  std::ofstream edges(dir + "/edges.txt");
  if (!nodes || !edges) throw std::runtime_error("cannot write plot series in " + dir);
  nodes << "# map nodes\n# id x y z qw qx qy qz\n";
  edges << "# map edges\n# from to dx dy dz loop\n";

  std::string header;
  std::getline(map_in, header);
  if (header != "local-frame-map v1")
    throw lfmap::IngestionError("unrecognized map file: " + run_dir);
  std::string token;
  std::size_t node_count = 0, edge_count = 0;
  map_in >> token >> node_count;
  for (std::size_t i = 0; i < node_count; ++i) {
    int id = 0, a = 0, b = 0;
    std::size_t keypoints = 0;
    double tx, ty, tz, qw, qx, qy, qz;
    std::string kw_node, kw_t, kw_q, kw_span, kw_keypoints;
    map_in >> kw_node >> id >> kw_t >> tx >> ty >> tz >> kw_q >> qw >> qx >>
        qy >> qz >> kw_span >> a >> b >> kw_keypoints >> keypoints;
    if (!map_in || kw_node != "node")
      throw lfmap::IngestionError("malformed node row in " + run_dir);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%d %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                  id, tx, ty, tz, qw, qx, qy, qz);
    nodes << buf;
  }
  map_in >> token >> edge_count;
  for (std::size_t i = 0; i < edge_count; ++i) {
    int from = 0, to = 0, obs = 0, loop = 0;
    double tx, ty, tz, qw, qx, qy, qz;
    std::string kw_edge, kw_t, kw_q, kw_obs, kw_loop;
    map_in >> kw_edge >> from >> to >> kw_t >> tx >> ty >> tz >> kw_q >> qw >>
        qx >> qy >> qz >> kw_obs >> obs >> kw_loop >> loop;
    if (!map_in || kw_edge != "edge")
      throw lfmap::IngestionError("malformed edge row in " + run_dir);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %d %.9f %.9f %.9f %d\n", from, to, tx,
                  ty, tz, loop);
    edges << buf;
  }

  const auto trajectory = lfmap::load_pose_file(run_dir + "/trajectory.txt");
  std::ofstream xyz(dir + "/trajectory_xyz.txt");
  xyz << "# estimated camera positions\n# x y z\n";
  for (const lfmap::GroundTruthPose& p : trajectory) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f\n", p.pose.translation.x(),
                  p.pose.translation.y(), p.pose.translation.z());
    xyz << buf;
  }
  if (!xyz) throw std::runtime_error("cannot write plot series in " + dir);
  std::printf("exported %zu nodes, %zu edges, %zu trajectory points to %s\n",
              node_count, edge_count, trajectory.size(), dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local-frame mapping: continually trained signed-distance "
               "fields with goal-biased planning"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string input, out, estimate_path, truth_path, world_path, scene_name;
  std::vector<double> start_override, goal_override;
  bool baseline = false;
  int pairs = 50;

  CLI::App* map_cmd = app.add_subcommand("map", "map an RGB-D sequence directory");
  map_cmd->add_option("input", input, "dataset directory (rgb.txt/depth.txt layout)")
      ->required();
  add_common(map_cmd, opts);
  map_cmd->add_option("--out", out, "output directory")->default_val("run_out");

  CLI::App* ate_cmd = app.add_subcommand("eval-ate", "trajectory error of an estimate");
  ate_cmd->add_option("estimate", estimate_path, "estimated trajectory file")->required();
  ate_cmd->add_option("groundtruth", truth_path, "ground-truth trajectory file")->required();

  CLI::App* plan_cmd = app.add_subcommand("plan", "plan a path in a world");
  plan_cmd->add_option("--world", world_path, "world file (default: built-in benchmark)");
  plan_cmd->add_option("--start", start_override, "start point x y z")->expected(3);
  plan_cmd->add_option("--goal", goal_override, "goal point x y z")->expected(3);
  plan_cmd->add_flag("--baseline", baseline, "use the uniform-sampling baseline");
  plan_cmd->add_option("--out", out, "plot file for the tree and path");
  add_common(plan_cmd, opts);

  CLI::App* bench_cmd = app.add_subcommand("bench-planner",
                                           "paired-seed planner benchmark");
  bench_cmd->add_option("--pairs", pairs, "number of seed pairs")->default_val(50);
  bench_cmd->add_option("--world", world_path, "world file (default: built-in benchmark)");
  bench_cmd->add_option("--out", out, "write the table to this file");
  add_common(bench_cmd, opts);

  CLI::App* synth_cmd = app.add_subcommand("synth", "render a synthetic dataset");
  synth_cmd->add_option("scene", scene_name,
                        "sphere-orbit | box-room | corridor | two-rooms | loop-square")
      ->required();
  synth_cmd->add_option("--out", out, "output directory (default: <scene>_data)");

  CLI::App* export_cmd = app.add_subcommand("export-plots",
                                            "derive plot series from a run directory");
  export_cmd->add_option("run_dir", input, "directory written by 'map'")->required();
  export_cmd->add_option("--out", out, "output directory (default: the run directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_cmd->parsed()) return run_map(input, opts, out);
    if (ate_cmd->parsed()) return run_eval_ate(estimate_path, truth_path);
    if (plan_cmd->parsed())
      return run_plan(world_path, opts, start_override, goal_override, baseline, out);
    if (bench_cmd->parsed()) return run_bench(world_path, opts, pairs, out);
    if (synth_cmd->parsed()) return run_synth(scene_name, out);
    if (export_cmd->parsed()) return run_export_plots(input, out);
  } catch (const lfmap::IngestionError& e) {
    std::fprintf(stderr, "ingestion error: %s\n", e.what());
    return kExitIngestion;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
