#include "lfmap/frame_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "lfmap/rng.hpp"

namespace lfmap {

const char* spawn_reason_name(SpawnReason reason) {
  switch (reason) {
    case SpawnReason::kTranslation: return "translation";
    case SpawnReason::kViewpoint: return "viewpoint";
    case SpawnReason::kFrameCount: return "frame-count";
    case SpawnReason::kNone: break;
  }
  return "none";
}

SpawnDecision should_spawn(const LocalFrame& current, const Pose& new_pose,
                           const SpawnPolicy& policy) {
  // Accumulated path length through all registered poses plus the new one.
  double path = 0.0;
  Eigen::Vector3d prev = Eigen::Vector3d::Zero();  // anchor origin
  for (const Pose& p : current.trajectory) {
    path += (p.translation - prev).norm();
    prev = p.translation;
  }
  path += (new_pose.translation - prev).norm();
  if (path > policy.max_translation)
    return {true, SpawnReason::kTranslation};

  // Rotation away from the anchor orientation (identity in frame coords).
  const double angle = rotation_angle_between(Pose::identity(), new_pose);
  if (angle > policy.max_viewpoint)
    return {true, SpawnReason::kViewpoint};

  if (static_cast<int>(current.trajectory.size()) + 1 > policy.max_frames)
    return {true, SpawnReason::kFrameCount};

  return {false, SpawnReason::kNone};
}

void append_observation(LocalFrame& frame, const Pose& pose_in_frame) {
  frame.trajectory.push_back(pose_in_frame);
  frame.t_end = frame.t_start + static_cast<int>(frame.trajectory.size()) - 1;
}

LocalFrame& spawn_frame(FrameGraph& graph, const Pose& world_pose, int t_start,
                        NetworkParams params, FeatureStore store,
                        std::size_t keypoint_count) {
  const int id = static_cast<int>(graph.frames.size());
  if (graph.active_id >= 0) {
    LocalFrame& prev = graph.frames[static_cast<std::size_t>(graph.active_id)];
    prev.frozen = true;
    if (prev.keypoints.empty() && !prev.store.empty())
      prev.keypoints = farthest_point_sample(prev.store, keypoint_count);
    TopoEdge edge;
    edge.from_id = prev.id;
    edge.to_id = id;
    edge.relative_pose = compose(inverse(prev.anchor_pose), world_pose);
    edge.observation_index = t_start;
    graph.edges.push_back(edge);
  }

  LocalFrame frame;
  frame.id = id;
  frame.anchor_pose = world_pose;
  frame.t_start = t_start;
  frame.t_end = t_start;
  frame.params = std::move(params);
  frame.store = std::move(store);
  graph.frames.push_back(std::move(frame));
  graph.active_id = id;
  return graph.frames.back();
}

namespace {

double feature_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 && nb < 1e-12) return 1.0;  // both unset: geometric match
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

double similarity_one_sided(const std::vector<MapPoint>& a, const Pose& a_anchor,
                            const std::vector<MapPoint>& b, const Pose& b_anchor,
                            double voxel) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("similarity: empty keypoint set");

  std::vector<Eigen::Vector3d> bw(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) bw[j] = b_anchor.apply(b[j].position);

  std::size_t matched = 0;
  for (const MapPoint& ka : a) {
    const Eigen::Vector3d pw = a_anchor.apply(ka.position);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < bw.size(); ++j) {
      const double d2 = (bw[j] - pw).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
    if (best_d2 <= voxel * voxel &&
        feature_cosine(ka.feature, b[best].feature) > 0.8)
      ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(a.size());
}

double similarity(const std::vector<MapPoint>& a, const Pose& a_anchor,
                  const std::vector<MapPoint>& b, const Pose& b_anchor,
                  double voxel) {
  return std::min(similarity_one_sided(a, a_anchor, b, b_anchor, voxel),
                  similarity_one_sided(b, b_anchor, a, a_anchor, voxel));
}

std::optional<int> loop_check(const LocalFrame& candidate,
                              const FrameGraph& graph, const LoopConfig& cfg) {
  if (candidate.keypoints.empty()) return std::nullopt;

  double best_score = -1.0;
  int best_id = -1;
  for (const LocalFrame& other : graph.frames) {
    if (other.id == candidate.id || other.keypoints.empty()) continue;
    // Skip frames already linked to the candidate (its chain neighbors).
    bool adjacent = false;
    for (const TopoEdge& e : graph.edges) {
      if ((e.from_id == candidate.id && e.to_id == other.id) ||
          (e.to_id == candidate.id && e.from_id == other.id)) {
        adjacent = true;
        break;
      }
    }
    if (adjacent) continue;
    const double anchor_dist =
        (other.anchor_pose.translation - candidate.anchor_pose.translation).norm();
    if (anchor_dist > cfg.search_radius) continue;

    const double score =
        similarity(candidate.keypoints, candidate.anchor_pose, other.keypoints,
                   other.anchor_pose, cfg.voxel);
    if (score > best_score) {
      best_score = score;
      best_id = other.id;
    }
  }
  if (best_id >= 0 && best_score >= cfg.threshold) return best_id;
  return std::nullopt;
}

TopoEdge& add_loop_edge(FrameGraph& graph, int from_id, int to_id,
                        int observation_index) {
  const auto& from = graph.frames.at(static_cast<std::size_t>(from_id));
  const auto& to = graph.frames.at(static_cast<std::size_t>(to_id));
  TopoEdge edge;
  edge.from_id = from_id;
  edge.to_id = to_id;
  edge.relative_pose = compose(inverse(from.anchor_pose), to.anchor_pose);
  edge.observation_index = observation_index;
  edge.loop_closure = true;
  graph.edges.push_back(edge);
  return graph.edges.back();
}

PlaneLabelReport label_traversable(LocalFrame& frame,
                                   const PlaneLabelConfig& cfg) {
  PlaneLabelReport report;

  std::vector<MapPoint> pts = frame.store.all_points();
  // Stable order so the RANSAC draws are independent of hash layout.
  std::sort(pts.begin(), pts.end(), [](const MapPoint& a, const MapPoint& b) {
    return std::make_tuple(a.position.x(), a.position.y(), a.position.z()) <
           std::make_tuple(b.position.x(), b.position.y(), b.position.z());
  });
  const std::size_t n = pts.size();

  // Gravity direction expressed in frame coordinates.
  const Eigen::Vector3d up =
      (frame.anchor_pose.rotation.transpose() * cfg.gravity_up).normalized();
  const double cos_tilt = std::cos(cfg.max_tilt);

  Eigen::Vector3d best_normal = Eigen::Vector3d::Zero();
  double best_offset = 0.0;
  std::size_t best_count = 0;

  if (n >= 3) {
    Rng rng(mix_seed(cfg.seed, 0x706c616eULL));
    for (int it = 0; it < cfg.iterations; ++it) {
      const std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)));
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)));
      const std::size_t k = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)));
      if (i == j || j == k || i == k) continue;
      Eigen::Vector3d normal = (pts[j].position - pts[i].position)
                                   .cross(pts[k].position - pts[i].position);
      const double norm = normal.norm();
      if (norm < 1e-12) continue;
      normal /= norm;
      if (normal.dot(up) < 0) normal = -normal;
      if (normal.dot(up) < cos_tilt) continue;

      const double offset = normal.dot(pts[i].position);
      std::size_t count = 0;
      for (const MapPoint& p : pts)
        if (std::abs(normal.dot(p.position) - offset) < cfg.inlier_distance)
          ++count;
      if (count > best_count) {
        best_count = count;
        best_normal = normal;
        best_offset = offset;
      }
    }
  }

  const std::size_t min_inliers = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil(cfg.min_inlier_fraction *
                                            static_cast<double>(n))));
  report.plane_found = best_count >= min_inliers && best_count > 0;

  frame.store.for_each_mutable([&](const VoxelKey&, MapPoint& mp) {
    const bool on_plane =
        report.plane_found &&
        std::abs(best_normal.dot(mp.position) - best_offset) < cfg.inlier_distance;
    mp.semantic = on_plane ? kTraversable : kObstacle;
    if (on_plane)
      ++report.traversable;
    else
      ++report.obstacle;
  });
  // Keypoints are copies; refresh their labels from the store.
  for (MapPoint& kp : frame.keypoints) {
    const VoxelKey key = frame.store.key_of(kp.position);
    if (frame.store.contains(key)) kp.semantic = frame.store.at(key).semantic;
  }

  if (!report.plane_found)
    report.warning =
        "no gravity-aligned support plane found; labeling all points obstacle";
  return report;
}

std::vector<RouteNode> topo_route(const FrameGraph& graph, int from_id,
                                  int to_id) {
  const int n = static_cast<int>(graph.frames.size());
  if (from_id < 0 || from_id >= n || to_id < 0 || to_id >= n)
    throw std::invalid_argument("topo_route: unknown frame id");

  struct Arc {
    int to;
    Pose step;
    double length;
  };
  std::vector<std::vector<Arc>> adj(static_cast<std::size_t>(n));
  for (const TopoEdge& e : graph.edges) {
    const double len = e.relative_pose.translation.norm();
    adj[static_cast<std::size_t>(e.from_id)].push_back(
        {e.to_id, e.relative_pose, len});
    adj[static_cast<std::size_t>(e.to_id)].push_back(
        {e.from_id, inverse(e.relative_pose), len});
  }

  // Dijkstra on the lexicographic cost (hop count, summed translation).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<int> hops(static_cast<std::size_t>(n),
                        std::numeric_limits<int>::max());
  std::vector<double> dist(static_cast<std::size_t>(n), inf);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  using Entry = std::tuple<int, double, int>;  // hops, dist, node
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  hops[static_cast<std::size_t>(from_id)] = 0;
  dist[static_cast<std::size_t>(from_id)] = 0.0;
  queue.push({0, 0.0, from_id});
  while (!queue.empty()) {
    const auto [h, d, u] = queue.top();
    queue.pop();
    if (done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    if (u == to_id) break;
    for (const Arc& arc : adj[static_cast<std::size_t>(u)]) {
      const int nh = h + 1;
      const double nd = d + arc.length;
      auto& bh = hops[static_cast<std::size_t>(arc.to)];
      auto& bd = dist[static_cast<std::size_t>(arc.to)];
      if (nh < bh || (nh == bh && nd < bd)) {
        bh = nh;
        bd = nd;
        parent[static_cast<std::size_t>(arc.to)] = u;
        queue.push({nh, nd, arc.to});
      }
    }
  }
  if (!done[static_cast<std::size_t>(to_id)])
    throw std::runtime_error("topo_route: frames are not connected");

  std::vector<int> ids;
  for (int v = to_id; v != -1; v = parent[static_cast<std::size_t>(v)])
    ids.push_back(v);
  std::reverse(ids.begin(), ids.end());

  std::vector<RouteNode> route;
  route.reserve(ids.size());
  Pose cumulative = Pose::identity();
  route.push_back({from_id, cumulative});
  for (std::size_t s = 1; s < ids.size(); ++s) {
    const int u = ids[s - 1], v = ids[s];
    // Recover the step pose from the arc used (first matching edge).
    Pose step;
    bool found = false;
    for (const TopoEdge& e : graph.edges) {
      if (e.from_id == u && e.to_id == v) {
        step = e.relative_pose;
        found = true;
        break;
      }
      if (e.from_id == v && e.to_id == u) {
        step = inverse(e.relative_pose);
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("topo_route: missing edge on path");
    cumulative = compose(cumulative, step);
    route.push_back({v, cumulative});
  }
  return route;
}

namespace {

void write_pose(std::ostream& os, const Pose& pose) {
  Eigen::Quaterniond q(pose.rotation);
  q.normalize();
  if (q.w() < 0 ||
      (q.w() == 0 && (q.x() < 0 || (q.x() == 0 && (q.y() < 0 ||
                                                   (q.y() == 0 && q.z() < 0))))))
    q.coeffs() = -q.coeffs();
  const Eigen::Vector3d& t = pose.translation;
  os << "t " << t.x() << ' ' << t.y() << ' ' << t.z() << " q " << q.w() << ' '
     << q.x() << ' ' << q.y() << ' ' << q.z();
}

}  // namespace

void write_map_text(const FrameGraph& graph, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write map file: " + path);
  os << std::setprecision(17);
  os << "local-frame-map v1\n";
  os << "nodes " << graph.frames.size() << "\n";
  for (const LocalFrame& f : graph.frames) {
    os << "node " << f.id << ' ';
    write_pose(os, f.anchor_pose);
    os << " span " << f.t_start << ' ' << f.t_end << " keypoints "
       << f.keypoints.size() << "\n";
  }
  os << "edges " << graph.edges.size() << "\n";
  for (const TopoEdge& e : graph.edges) {
    os << "edge " << e.from_id << ' ' << e.to_id << ' ';
    write_pose(os, e.relative_pose);
    os << " obs " << e.observation_index << " loop " << (e.loop_closure ? 1 : 0)
       << "\n";
  }
  if (!os) throw std::runtime_error("failed writing map file: " + path);
}

}  // namespace lfmap
