#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lfmap/field.hpp"
#include "lfmap/geometry.hpp"

namespace lfmap {

/// A bounded map segment: its own field (network + feature store), the
/// observation poses registered inside it, and a keypoint subsample used
/// for revisit checks. Poses and map points live in frame coordinates;
/// anchor_pose places the frame in the world.
struct LocalFrame {
  int id = 0;
  Pose anchor_pose;
  int t_start = 0;
  int t_end = 0;
  NetworkParams params;
  FeatureStore store;
  std::vector<MapPoint> keypoints;
  std::vector<Pose> trajectory;  // frame coordinates, identity at spawn
  bool frozen = false;
};

/// Arc of the topological map; relative_pose = from_anchor^-1 * to_anchor
/// at creation time (exact: anchors are never re-optimized).
struct TopoEdge {
  int from_id = 0;
  int to_id = 0;
  Pose relative_pose;
  int observation_index = 0;
  bool loop_closure = false;
};

enum class SpawnReason { kNone, kTranslation, kViewpoint, kFrameCount };
const char* spawn_reason_name(SpawnReason reason);

struct SpawnPolicy {
  double max_translation = 3.0;              // accumulated path length, m
  double max_viewpoint = 30.0 * M_PI / 180.0;  // rotation from anchor, rad
  int max_frames = 120;                      // observations per frame
};

struct SpawnDecision {
  bool spawn = false;
  SpawnReason reason = SpawnReason::kNone;
};

/// Evaluates the spawn triggers for the next pose (frame coordinates).
/// Checked in a fixed order (translation, viewpoint, frame count) so every
/// spawn records exactly one reason.
SpawnDecision should_spawn(const LocalFrame& current, const Pose& new_pose,
                           const SpawnPolicy& policy);

struct FrameGraph {
  std::vector<LocalFrame> frames;
  std::vector<TopoEdge> edges;
  int active_id = -1;

  LocalFrame& active() { return frames.at(static_cast<std::size_t>(active_id)); }
  const LocalFrame& active() const {
    return frames.at(static_cast<std::size_t>(active_id));
  }
};

/// Adds a frame anchored at world_pose and chains it to the previous active
/// frame with one edge. The previous frame is frozen and its keypoints are
/// subsampled; the caller is responsible for having consolidated its field.
LocalFrame& spawn_frame(FrameGraph& graph, const Pose& world_pose, int t_start,
                        NetworkParams params, FeatureStore store,
                        std::size_t keypoint_count = 512);

/// Records a registered pose (frame coordinates) and keeps the span in sync:
/// t_end - t_start + 1 == trajectory.size().
void append_observation(LocalFrame& frame, const Pose& pose_in_frame);

/// One-sided similarity: fraction of a's keypoints (world coordinates via
/// the anchors) with a b-keypoint within voxel meters and feature cosine
/// > 0.8. Throws std::invalid_argument when either set is empty.
double similarity_one_sided(const std::vector<MapPoint>& a, const Pose& a_anchor,
                            const std::vector<MapPoint>& b, const Pose& b_anchor,
                            double voxel);

/// min(similarity(a,b), similarity(b,a)).
double similarity(const std::vector<MapPoint>& a, const Pose& a_anchor,
                  const std::vector<MapPoint>& b, const Pose& b_anchor,
                  double voxel);

struct LoopConfig {
  double threshold = 0.4;     // minimum symmetric similarity
  double search_radius = 6.0;  // anchor distance cutoff, m
  double voxel = 0.1;          // spatial tolerance for keypoint matches
};

/// Best previously-visited frame matching the candidate, or nullopt. The
/// candidate itself and its direct predecessor are excluded.
std::optional<int> loop_check(const LocalFrame& candidate,
                              const FrameGraph& graph, const LoopConfig& cfg);

/// Records a loop-closure arc between two existing frames.
TopoEdge& add_loop_edge(FrameGraph& graph, int from_id, int to_id,
                        int observation_index);

struct PlaneLabelConfig {
  double max_tilt = 15.0 * M_PI / 180.0;  // from the gravity axis
  double inlier_distance = 0.05;          // m
  int iterations = 200;
  double min_inlier_fraction = 0.2;
  Eigen::Vector3d gravity_up = Eigen::Vector3d(0, -1, 0);  // +y points down
  std::uint64_t seed = 0;
};

struct PlaneLabelReport {
  bool plane_found = false;
  std::size_t traversable = 0;
  std::size_t obstacle = 0;
  std::string warning;
};

/// Labels the frame's map points by the dominant gravity-aligned plane:
/// RANSAC inliers become traversable, the rest obstacles. Without a
/// qualifying plane everything is an obstacle and a warning is recorded.
PlaneLabelReport label_traversable(LocalFrame& frame,
                                   const PlaneLabelConfig& cfg);

struct RouteNode {
  int frame_id = 0;
  Pose pose_in_start;  // composed along the route, identity at from_id
};

/// Shortest route by hop count, ties broken by summed translation norm.
/// Throws std::runtime_error when the nodes are not connected.
std::vector<RouteNode> topo_route(const FrameGraph& graph, int from_id,
                                  int to_id);

/// Human-readable graph listing: nodes (id, anchor as translation + unit
/// quaternion, span, keypoint count) and edges (from, to, relative pose).
void write_map_text(const FrameGraph& graph, const std::string& path);

}  // namespace lfmap
