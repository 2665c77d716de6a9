#pragma once

#include <Eigen/Geometry>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lfmap/field.hpp"
#include "lfmap/frame_graph.hpp"
#include "lfmap/geometry.hpp"
#include "lfmap/rng.hpp"

namespace lfmap {

/// Collision geometry the planner queries. Positions are world coordinates;
/// clearance is the distance to the nearest obstacle surface (negative
/// inside), +infinity where nothing constrains the point.
class World {
 public:
  virtual ~World() = default;
  virtual double clearance(const Eigen::Vector3d& p) const = 0;
  virtual const Eigen::AlignedBox3d& bounds() const = 0;
};

/// Vertical prism obstacle: a disc or an axis-aligned box footprint in the
/// x-z plane, unbounded along y (the gravity axis).
struct Obstacle {
  enum Type { kDisc, kBox };
  Type type = kDisc;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Zero();  // disc: x = radius; box: half-extents
};

/// Closed-form world: exact signed distances, used for oracle tests and the
/// planner benchmark.
class AnalyticWorld : public World {
 public:
  AnalyticWorld() = default;
  AnalyticWorld(const Eigen::AlignedBox3d& bounds, std::vector<Obstacle> obstacles)
      : bounds_(bounds), obstacles_(std::move(obstacles)) {}

  double clearance(const Eigen::Vector3d& p) const override;
  const Eigen::AlignedBox3d& bounds() const override { return bounds_; }

  std::vector<Obstacle>& obstacles() { return obstacles_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  Eigen::AlignedBox3d& mutable_bounds() { return bounds_; }

 private:
  Eigen::AlignedBox3d bounds_{Eigen::Vector3d(-5, -5, -5), Eigen::Vector3d(5, 5, 5)};
  std::vector<Obstacle> obstacles_;
};

/// Wraps a local frame's trained field as collision geometry. Queries are
/// mapped into frame coordinates through the anchor; the predicted sdf is
/// the clearance. Out-of-map points are free while exploring, blocked in
/// strict mode.
class FieldWorld : public World {
 public:
  FieldWorld(const FeatureStore& store, const NetworkParams& params,
             const Pose& anchor, const Eigen::AlignedBox3d& bounds,
             bool strict = false)
      : store_(&store), params_(&params), anchor_inv_(inverse(anchor)),
        bounds_(bounds), strict_(strict) {}

  double clearance(const Eigen::Vector3d& p) const override;
  const Eigen::AlignedBox3d& bounds() const override { return bounds_; }

 private:
  const FeatureStore* store_;
  const NetworkParams* params_;
  Pose anchor_inv_;
  Eigen::AlignedBox3d bounds_;
  bool strict_;
};

/// Minimum clearance over several worlds; bounds = union of theirs.
class CompositeWorld : public World {
 public:
  explicit CompositeWorld(std::vector<const World*> parts);
  double clearance(const Eigen::Vector3d& p) const override;
  const Eigen::AlignedBox3d& bounds() const override { return bounds_; }

 private:
  std::vector<const World*> parts_;
  Eigen::AlignedBox3d bounds_;
};

struct PlannerConfig {
  double step_size = 0.3;        // m, RRT* extension length
  double rewire_radius = 1.0;    // m
  double clearance = 0.25;       // m, required distance from obstacles
  double alpha = 15.0 * M_PI / 180.0;  // rad, fan step between alternative rays
  int n_alt_rays = 4;            // rays at +-alpha ... +-K*alpha
  double goal_bias = 0.6;        // probability of sampling along the ray fan
  double uniform_fallback = 0.1; // probability of a plain uniform sample
  int max_iterations = 5000;
  double goal_tolerance = 0.2;   // m
  bool planar = true;            // keep waypoints at the start's height
};

struct PlanResult {
  std::vector<Eigen::Vector3d> path;
  double length = 0.0;       // m, sum of waypoint gaps
  int iterations = 0;
  int tree_size = 0;
  double runtime_ms = 0.0;
  bool success = false;
  int failed_segment = -1;   // set by plan_with_topo on segment failure
  // Final search tree for plot export; tree_parents[i] is -1 at the root.
  std::vector<Eigen::Vector3d> tree_nodes;
  std::vector<int> tree_parents;
};

/// True iff every sample along [a, b] (spacing delta/2, endpoints included)
/// stays inside the world bounds with clearance >= delta.
bool collision_free(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                    const World& world, double delta);

/// Draws planner samples: with probability goal_bias along the fan of rays
/// through the goal vector (ray indices 0, +1, -1, ..., +-K round-robin,
/// rotated about the vertical axis, range ~ U(0, distance-to-goal)); with
/// probability uniform_fallback uniform in bounds; otherwise uniform in the
/// ellipsoid spanned by current and goal.
class GoalSampler {
 public:
  GoalSampler(const PlannerConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed) {}

  Eigen::Vector3d sample(const Eigen::Vector3d& current,
                         const Eigen::Vector3d& goal,
                         const Eigen::AlignedBox3d& bounds);

  /// Puts the round-robin back on the goal ray. The planner calls this on
  /// progress, so the alternative rays only engage while the tree is stuck.
  void reset_schedule() { ray_cursor_ = 0; }

 private:
  PlannerConfig cfg_;
  Rng rng_;
  int ray_cursor_ = 0;
};

/// Goal-biased RRT*: fan-directed sampling, parent choice and rewiring by
/// path length, first solution returned after shortcut smoothing. Throws
/// std::invalid_argument when the start violates the clearance.
PlanResult plan(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                const World& world, const PlannerConfig& cfg,
                std::uint64_t seed);

/// Conventional RRT*: the identical tree-growth loop with plain uniform
/// sampling (5% goal samples) and no path post-processing — it returns the
/// raw first-solution tree path, as standard RRT* does.
PlanResult baseline_plan(const Eigen::Vector3d& start,
                         const Eigen::Vector3d& goal, const World& world,
                         const PlannerConfig& cfg, std::uint64_t seed);

/// Supplies the collision world for a frame id during topological planning.
using WorldProvider = std::function<const World&(int frame_id)>;

/// Plans across local frames: routes through the graph from the frame
/// nearest the start to the frame nearest the goal, plans each leg toward
/// the next anchor, and re-smooths the concatenated path against the
/// combined worlds.
PlanResult plan_with_topo(const Eigen::Vector3d& start_world,
                          const Eigen::Vector3d& goal_world,
                          const FrameGraph& graph, const WorldProvider& worlds,
                          const PlannerConfig& cfg, std::uint64_t seed);

/// Benchmark scene: a flat wall across the map pierced by one narrow doorway
/// centered on the start-goal axis; the only alternative route climbs over
/// the wall top and is about 1.4x longer.
struct BenchmarkWorld {
  AnalyticWorld world;
  Eigen::Vector3d start;
  Eigen::Vector3d goal;
};
BenchmarkWorld make_corridor_world();

/// Structured-text world IO (bounds, obstacles, start, goal).
void save_world(const BenchmarkWorld& bw, const std::string& path);
BenchmarkWorld load_world(const std::string& path);

}  // namespace lfmap
