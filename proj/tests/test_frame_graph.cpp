#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lfmap/frame_graph.hpp"
#include "lfmap/rng.hpp"

using namespace lfmap;

namespace {

MlpArchitecture tiny_arch() {
  MlpArchitecture arch;
  arch.feature_dim = 4;
  arch.pe_bands = 2;
  arch.hidden = {8};
  return arch;
}

FeatureStore tiny_store() { return FeatureStore(0.1, 4, 6); }

Pose pose_at(double x, double y, double z) {
  Pose p;
  p.translation = Eigen::Vector3d(x, y, z);
  return p;
}

Pose rot_y(double angle) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
  return p;
}

LocalFrame frame_with_path(const std::vector<Pose>& trajectory) {
  LocalFrame f;
  for (const Pose& p : trajectory) append_observation(f, p);
  return f;
}

/// Keypoints on a jittered grid, feature = unit vector seeded per point.
std::vector<MapPoint> grid_keypoints(const Eigen::Vector3d& origin, int nx,
                                     int nz, double spacing,
                                     std::uint64_t seed) {
  std::vector<MapPoint> pts;
  Rng rng(seed);
  for (int i = 0; i < nx; ++i) {
    for (int k = 0; k < nz; ++k) {
      MapPoint mp;
      mp.position = origin + Eigen::Vector3d(i * spacing, 0.0, k * spacing);
      mp.feature = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(),
                                   rng.normal());
      mp.feature.normalize();
      pts.push_back(mp);
    }
  }
  return pts;
}

double pose_gap(const Pose& a, const Pose& b) {
  const Pose d = compose(inverse(a), b);
  return d.translation.norm() + rotation_angle_between(a, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// should_spawn

TEST_CASE("small motion inside a fresh frame does not spawn") {
  LocalFrame f = frame_with_path({Pose::identity(), pose_at(0.2, 0, 0)});
  const auto d = should_spawn(f, pose_at(0.3, 0, 0), SpawnPolicy{});
  CHECK_FALSE(d.spawn);
  CHECK(d.reason == SpawnReason::kNone);
}

TEST_CASE("accumulated path length triggers even when displacement stays small") {
  // Zig-zag: 8 legs of 0.5 m = 4 m of path, never more than 0.5 m from origin.
  std::vector<Pose> traj{Pose::identity()};
  for (int i = 1; i <= 8; ++i)
    traj.push_back(pose_at((i % 2) * 0.5, 0, 0));
  LocalFrame f = frame_with_path(traj);
  const auto d = should_spawn(f, pose_at(0.5, 0, 0), SpawnPolicy{});
  CHECK(d.spawn);
  CHECK(d.reason == SpawnReason::kTranslation);
}

TEST_CASE("path length exactly at the limit does not spawn") {
  SpawnPolicy policy;
  policy.max_translation = 3.0;
  LocalFrame f = frame_with_path({Pose::identity(), pose_at(1.5, 0, 0)});
  CHECK_FALSE(should_spawn(f, pose_at(3.0, 0, 0), policy).spawn);
  CHECK(should_spawn(f, pose_at(3.0 + 1e-9, 0, 0), policy).spawn);
}

TEST_CASE("in-place rotation beyond the viewpoint limit spawns") {
  LocalFrame f = frame_with_path({Pose::identity()});
  const auto over = should_spawn(f, rot_y(35.0 * M_PI / 180.0), SpawnPolicy{});
  CHECK(over.spawn);
  CHECK(over.reason == SpawnReason::kViewpoint);
  const auto under = should_spawn(f, rot_y(25.0 * M_PI / 180.0), SpawnPolicy{});
  CHECK_FALSE(under.spawn);
}

TEST_CASE("observation count reaching the limit spawns") {
  SpawnPolicy policy;
  std::vector<Pose> traj(120, Pose::identity());
  LocalFrame f = frame_with_path(traj);
  const auto d = should_spawn(f, Pose::identity(), policy);  // would be #121
  CHECK(d.spawn);
  CHECK(d.reason == SpawnReason::kFrameCount);

  LocalFrame g = frame_with_path(std::vector<Pose>(119, Pose::identity()));
  CHECK_FALSE(should_spawn(g, Pose::identity(), policy).spawn);  // #120 fits
}

TEST_CASE("every spawn decision carries exactly one reason") {
  // Translation and viewpoint both exceeded: the first trigger wins.
  LocalFrame f = frame_with_path({Pose::identity(), pose_at(4.0, 0, 0)});
  Pose far_and_turned = rot_y(1.0);
  far_and_turned.translation = Eigen::Vector3d(4.0, 0, 0);
  const auto d = should_spawn(f, far_and_turned, SpawnPolicy{});
  CHECK(d.spawn);
  CHECK(d.reason == SpawnReason::kTranslation);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    LocalFrame h = frame_with_path(
        {Pose::identity(), pose_at(rng.uniform(0, 2.5), 0, 0)});
    Pose next = rot_y(rng.uniform(0, 0.8));
    next.translation = Eigen::Vector3d(rng.uniform(0, 3.0), 0, 0);
    const auto dec = should_spawn(h, next, SpawnPolicy{});
    CHECK(dec.spawn == (dec.reason != SpawnReason::kNone));
  }
}

// ---------------------------------------------------------------------------
// spawn_frame / append_observation

TEST_CASE("spawning N frames yields a chain of N nodes and N-1 edges") {
  const MlpArchitecture arch = tiny_arch();
  FrameGraph graph;
  const int n = 5;
  for (int i = 0; i < n; ++i) {
    Pose anchor = rot_y(0.1 * i);
    anchor.translation = Eigen::Vector3d(2.0 * i, 0.1 * i, 0);
    spawn_frame(graph, anchor, 10 * i, NetworkParams::create(arch, 7 + i),
                tiny_store());
  }
  REQUIRE(graph.frames.size() == n);
  REQUIRE(graph.edges.size() == n - 1);
  CHECK(graph.active_id == n - 1);

  for (int i = 0; i + 1 < n; ++i) {
    CHECK(graph.edges[i].from_id == i);
    CHECK(graph.edges[i].to_id == i + 1);
    CHECK_FALSE(graph.edges[i].loop_closure);
    CHECK(graph.frames[i].frozen);
  }
  CHECK_FALSE(graph.frames[n - 1].frozen);

  // Composing the chain of relative poses reproduces the last anchor.
  Pose composed = graph.frames[0].anchor_pose;
  for (const TopoEdge& e : graph.edges) composed = compose(composed, e.relative_pose);
  CHECK(pose_gap(composed, graph.frames[n - 1].anchor_pose) < 1e-6);
}

TEST_CASE("each edge pose matches the anchors it connects") {
  const MlpArchitecture arch = tiny_arch();
  FrameGraph graph;
  Rng rng(11);
  for (int i = 0; i < 4; ++i) {
    Twist xi;
    for (int k = 0; k < 3; ++k) {
      xi.rotational[k] = rng.uniform(-0.5, 0.5);
      xi.translational[k] = rng.uniform(-2, 2);
    }
    spawn_frame(graph, exp_map(xi), i, NetworkParams::create(arch, 3), tiny_store());
  }
  for (const TopoEdge& e : graph.edges) {
    const Pose expected = compose(inverse(graph.frames[e.from_id].anchor_pose),
                                  graph.frames[e.to_id].anchor_pose);
    CHECK(pose_gap(e.relative_pose, expected) < 1e-6);
  }
}

TEST_CASE("spawn freezes the predecessor and subsamples its keypoints") {
  const MlpArchitecture arch = tiny_arch();
  FrameGraph graph;
  LocalFrame& first =
      spawn_frame(graph, Pose::identity(), 0, NetworkParams::create(arch, 1),
                  tiny_store());
  ColorPointCloud cloud;
  Rng rng(2);
  for (int i = 0; i < 2000; ++i)
    cloud.push(Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2),
                               rng.uniform(-2, 2)),
               Eigen::Vector3d::Zero());
  insert_keypoints(cloud, first.store, 0.01, 9);
  REQUIRE(first.store.size() > 512);

  spawn_frame(graph, pose_at(4, 0, 0), 50, NetworkParams::create(arch, 2),
              tiny_store(), 512);
  CHECK(graph.frames[0].frozen);
  CHECK(graph.frames[0].keypoints.size() == 512);
  CHECK(graph.frames[1].keypoints.empty());
}

TEST_CASE("appending observations keeps the span in sync") {
  LocalFrame f;
  f.t_start = 40;
  f.t_end = 40;
  for (int i = 0; i < 7; ++i) {
    append_observation(f, pose_at(0.1 * i, 0, 0));
    CHECK(f.t_end - f.t_start + 1 == static_cast<int>(f.trajectory.size()));
  }
  CHECK(f.t_end == 46);
}

// ---------------------------------------------------------------------------
// similarity

TEST_CASE("similarity of a frame with itself is one") {
  const auto kp = grid_keypoints(Eigen::Vector3d(0, 1, 0), 8, 8, 0.1, 3);
  const Pose anchor = rot_y(0.3);
  CHECK(similarity(kp, anchor, kp, anchor, 0.1) == 1.0);
}

TEST_CASE("similarity throws on empty keypoint sets") {
  const auto kp = grid_keypoints(Eigen::Vector3d::Zero(), 2, 2, 0.1, 3);
  const std::vector<MapPoint> empty;
  CHECK_THROWS_AS(similarity(empty, Pose::identity(), kp, Pose::identity(), 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(similarity(kp, Pose::identity(), empty, Pose::identity(), 0.1),
                  std::invalid_argument);
}

TEST_CASE("disjoint keypoint sets score zero") {
  const double v = 0.1;
  const auto a = grid_keypoints(Eigen::Vector3d::Zero(), 6, 6, 0.1, 3);
  const auto b = grid_keypoints(Eigen::Vector3d(10 * v + 1.0, 0, 0), 6, 6, 0.1, 3);
  CHECK(similarity(a, Pose::identity(), b, Pose::identity(), v) == 0.0);
}

TEST_CASE("half-overlapping sets with identical features score near one half") {
  // a covers two grid patches; b covers one of them with the same features.
  const auto left = grid_keypoints(Eigen::Vector3d::Zero(), 8, 8, 0.1, 3);
  const auto right = grid_keypoints(Eigen::Vector3d(5, 0, 0), 8, 8, 0.1, 4);
  std::vector<MapPoint> a = left;
  a.insert(a.end(), right.begin(), right.end());
  const std::vector<MapPoint>& b = left;
  const double s = similarity(a, Pose::identity(), b, Pose::identity(), 0.1);
  CHECK(s >= 0.4);
  CHECK(s <= 0.6);
}

TEST_CASE("anchor alignment happens in world coordinates") {
  // The same world-space points expressed in two different frames.
  const auto world = grid_keypoints(Eigen::Vector3d(1, 0, 2), 6, 6, 0.1, 8);
  Pose anchor_a = rot_y(0.4);
  anchor_a.translation = Eigen::Vector3d(0.5, 0, -1);
  Pose anchor_b = rot_y(-0.9);
  anchor_b.translation = Eigen::Vector3d(-2, 0.3, 0.7);

  auto in_frame = [&](const Pose& anchor) {
    std::vector<MapPoint> out = world;
    const Pose inv = inverse(anchor);
    for (MapPoint& mp : out) mp.position = inv.apply(mp.position);
    return out;
  };
  const auto a = in_frame(anchor_a);
  const auto b = in_frame(anchor_b);
  CHECK(similarity(a, anchor_a, b, anchor_b, 0.05) == 1.0);
  // Ignoring the anchors, the two frames look nothing alike.
  CHECK(similarity(a, Pose::identity(), b, Pose::identity(), 0.05) < 0.1);
}

TEST_CASE("matching keypoints must also agree in feature space") {
  auto a = grid_keypoints(Eigen::Vector3d::Zero(), 6, 6, 0.1, 3);
  std::vector<MapPoint> b = a;
  // Same positions, orthogonal features: e1 vs e2.
  for (MapPoint& mp : a) mp.feature = Eigen::Vector4d(1, 0, 0, 0);
  for (MapPoint& mp : b) mp.feature = Eigen::Vector4d(0, 1, 0, 0);
  CHECK(similarity(a, Pose::identity(), b, Pose::identity(), 0.1) == 0.0);
}

TEST_CASE("symmetric similarity takes the weaker direction") {
  const auto small = grid_keypoints(Eigen::Vector3d::Zero(), 4, 4, 0.1, 3);
  auto big = grid_keypoints(Eigen::Vector3d::Zero(), 4, 4, 0.1, 3);
  const auto extra = grid_keypoints(Eigen::Vector3d(5, 0, 0), 4, 4, 0.1, 4);
  big.insert(big.end(), extra.begin(), extra.end());
  const double one_sided =
      similarity_one_sided(small, Pose::identity(), big, Pose::identity(), 0.1);
  CHECK(one_sided == 1.0);
  const double sym =
      similarity(small, Pose::identity(), big, Pose::identity(), 0.1);
  CHECK(sym == doctest::Approx(0.5));
}

// ---------------------------------------------------------------------------
// loop_check / add_loop_edge

namespace {

FrameGraph square_graph_with_revisit() {
  // Anchors on a 4 m square; the fifth frame sits back at the start and sees
  // the same keypoints as frame 0.
  const MlpArchitecture arch = tiny_arch();
  FrameGraph graph;
  const Eigen::Vector3d corners[5] = {{0, 0, 0}, {4, 0, 0}, {4, 0, 4},
                                      {0, 0, 4}, {0.3, 0, 0.2}};
  for (int i = 0; i < 5; ++i) {
    LocalFrame& f = spawn_frame(graph, pose_at(corners[i].x(), corners[i].y(),
                                               corners[i].z()),
                                i, NetworkParams::create(arch, 1), tiny_store());
    // World keypoints around each anchor, expressed in frame coordinates.
    const Eigen::Vector3d center = (i == 4) ? corners[0] : corners[i];
    auto world = grid_keypoints(center + Eigen::Vector3d(-0.4, 1.0, -0.4), 8, 8,
                                0.1, 21 + (i == 4 ? 0 : i));
    const Pose inv = inverse(f.anchor_pose);
    for (MapPoint& mp : world) mp.position = inv.apply(mp.position);
    f.keypoints = world;
  }
  return graph;
}

}  // namespace

TEST_CASE("revisiting the start of a loop matches the first frame") {
  FrameGraph graph = square_graph_with_revisit();
  LoopConfig cfg;
  cfg.threshold = 0.4;
  cfg.search_radius = 2.0;
  const auto match = loop_check(graph.frames[4], graph, cfg);
  REQUIRE(match.has_value());
  CHECK(*match == 0);

  // A closure edge between the matched pair stays anchor-consistent.
  const TopoEdge& e = add_loop_edge(graph, 4, *match, 99);
  CHECK(e.loop_closure);
  const Pose expected = compose(inverse(graph.frames[4].anchor_pose),
                                graph.frames[0].anchor_pose);
  CHECK(pose_gap(e.relative_pose, expected) < 1e-6);
}

TEST_CASE("an impossible threshold never matches") {
  FrameGraph graph = square_graph_with_revisit();
  LoopConfig cfg;
  cfg.threshold = 1.01;
  cfg.search_radius = 100.0;
  CHECK_FALSE(loop_check(graph.frames[4], graph, cfg).has_value());
}

TEST_CASE("frames outside the search radius are not considered") {
  FrameGraph graph = square_graph_with_revisit();
  LoopConfig cfg;
  cfg.threshold = 0.01;
  cfg.search_radius = 0.05;  // even frame 0 is ~0.36 m away from frame 4
  CHECK_FALSE(loop_check(graph.frames[4], graph, cfg).has_value());
}

TEST_CASE("the chain predecessor is not reported as a loop") {
  const MlpArchitecture arch = tiny_arch();
  FrameGraph graph;
  for (int i = 0; i < 2; ++i) {
    LocalFrame& f = spawn_frame(graph, pose_at(0.2 * i, 0, 0), i,
                                NetworkParams::create(arch, 1), tiny_store());
    f.keypoints = grid_keypoints(Eigen::Vector3d(0, 1, 0), 6, 6, 0.1, 5);
  }
  LoopConfig cfg;
  cfg.threshold = 0.01;
  // Frames 0 and 1 overlap almost perfectly, but 0 is 1's predecessor.
  CHECK_FALSE(loop_check(graph.frames[1], graph, cfg).has_value());
}

// ---------------------------------------------------------------------------
// label_traversable

namespace {

LocalFrame floor_and_box_frame(std::size_t* floor_count = nullptr,
                               std::size_t* box_count = nullptr) {
  // +y points down: the floor lies at y = +1.5, the box rises above it
  // (smaller y). Positions snap onto a 0.1 m grid so voxels never collide.
  LocalFrame f;
  f.store = FeatureStore(0.05, 4, 6);
  std::size_t nf = 0, nb = 0;
  for (int i = 0; i < 20; ++i) {
    for (int k = 0; k < 20; ++k) {
      MapPoint mp;
      mp.position = Eigen::Vector3d(-1.0 + 0.1 * i, 1.5, -1.0 + 0.1 * k);
      mp.feature = Eigen::Vector4d::Ones();
      f.store.insert(mp);
      ++nf;
    }
  }
  for (int i = 0; i < 5; ++i) {
    for (int j = 1; j <= 4; ++j) {
      for (int k = 0; k < 5; ++k) {
        MapPoint mp;
        mp.position = Eigen::Vector3d(0.025 + 0.1 * i, 1.5 - 0.1 * j,
                                      0.025 + 0.1 * k);
        mp.feature = Eigen::Vector4d::Ones();
        f.store.insert(mp);
        ++nb;
      }
    }
  }
  if (floor_count) *floor_count = nf;
  if (box_count) *box_count = nb;
  return f;
}

}  // namespace

TEST_CASE("the floor is labeled traversable and the box as obstacle") {
  std::size_t nf = 0, nb = 0;
  LocalFrame f = floor_and_box_frame(&nf, &nb);
  REQUIRE(f.store.size() == nf + nb);

  PlaneLabelConfig cfg;
  cfg.seed = 4;
  const auto report = label_traversable(f, cfg);
  CHECK(report.plane_found);
  CHECK(report.warning.empty());
  CHECK(report.traversable == nf);
  CHECK(report.obstacle == nb);

  // The labels landed on the right points.
  f.store.for_each([&](const VoxelKey&, const MapPoint& mp) {
    if (std::abs(mp.position.y() - 1.5) < 1e-9)
      CHECK(mp.semantic == kTraversable);
    else
      CHECK(mp.semantic == kObstacle);
  });
}

TEST_CASE("a lone vertical wall yields no plane and a warning") {
  LocalFrame f;
  f.store = FeatureStore(0.05, 4, 6);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      MapPoint mp;
      mp.position = Eigen::Vector3d(2.0, -1.0 + 0.2 * j, -1.0 + 0.2 * i);
      mp.feature = Eigen::Vector4d::Ones();
      f.store.insert(mp);
    }
  }
  PlaneLabelConfig cfg;
  cfg.seed = 4;
  const auto report = label_traversable(f, cfg);
  CHECK_FALSE(report.plane_found);
  CHECK_FALSE(report.warning.empty());
  CHECK(report.traversable == 0);
  CHECK(report.obstacle == f.store.size());
  f.store.for_each([&](const VoxelKey&, const MapPoint& mp) {
    CHECK(mp.semantic == kObstacle);
  });
}

TEST_CASE("the gravity axis is interpreted through the frame anchor") {
  // Anchor rotated 90 degrees about z: the world floor normal (0,-1,0)
  // becomes (-1,0,0) in frame coordinates.
  LocalFrame f;
  f.store = FeatureStore(0.05, 4, 6);
  f.anchor_pose.rotation =
      Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Pose inv = inverse(f.anchor_pose);
  for (int i = 0; i < 15; ++i) {
    for (int k = 0; k < 15; ++k) {
      MapPoint mp;
      const Eigen::Vector3d world(-0.7 + 0.1 * i, 1.5, -0.7 + 0.1 * k);
      mp.position = inv.apply(world);
      mp.feature = Eigen::Vector4d::Ones();
      f.store.insert(mp);
    }
  }
  PlaneLabelConfig cfg;
  cfg.seed = 4;
  const auto report = label_traversable(f, cfg);
  CHECK(report.plane_found);
  CHECK(report.traversable == f.store.size());
}

TEST_CASE("labeling is deterministic for a fixed seed") {
  auto labels_of = [](std::uint64_t seed) {
    LocalFrame f = floor_and_box_frame();
    PlaneLabelConfig cfg;
    cfg.seed = seed;
    label_traversable(f, cfg);
    std::vector<MapPoint> pts = f.store.all_points();
    std::sort(pts.begin(), pts.end(), [](const MapPoint& a, const MapPoint& b) {
      return std::make_tuple(a.position.x(), a.position.y(), a.position.z()) <
             std::make_tuple(b.position.x(), b.position.y(), b.position.z());
    });
    std::vector<int> labels;
    for (const MapPoint& p : pts) labels.push_back(p.semantic);
    return labels;
  };
  CHECK(labels_of(123) == labels_of(123));
}

// ---------------------------------------------------------------------------
// topo_route

namespace {

FrameGraph anchors_only_graph(const std::vector<Eigen::Vector3d>& anchors) {
  FrameGraph graph;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    LocalFrame f;
    f.id = static_cast<int>(i);
    f.anchor_pose = pose_at(anchors[i].x(), anchors[i].y(), anchors[i].z());
    graph.frames.push_back(std::move(f));
  }
  graph.active_id = static_cast<int>(anchors.size()) - 1;
  return graph;
}

void link(FrameGraph& graph, int from, int to) {
  TopoEdge e;
  e.from_id = from;
  e.to_id = to;
  e.relative_pose = compose(inverse(graph.frames[from].anchor_pose),
                            graph.frames[to].anchor_pose);
  graph.edges.push_back(e);
}

}  // namespace

TEST_CASE("routing a frame to itself is a single identity node") {
  FrameGraph graph = anchors_only_graph({{0, 0, 0}, {1, 0, 0}});
  link(graph, 0, 1);
  const auto route = topo_route(graph, 1, 1);
  REQUIRE(route.size() == 1);
  CHECK(route[0].frame_id == 1);
  CHECK(route[0].pose_in_start.translation.norm() == 0.0);
}

TEST_CASE("a chain routes end to end with composed poses") {
  FrameGraph graph =
      anchors_only_graph({{0, 0, 0}, {2, 0, 0}, {4, 0.5, 0}, {6, 0.5, -1}});
  for (int i = 0; i + 1 < 4; ++i) link(graph, i, i + 1);
  const auto route = topo_route(graph, 0, 3);
  REQUIRE(route.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(route[i].frame_id == i);
  // The composed pose of every visited node matches its anchor relative to
  // the start.
  for (const RouteNode& node : route) {
    const Pose expected = compose(inverse(graph.frames[0].anchor_pose),
                                  graph.frames[node.frame_id].anchor_pose);
    CHECK(pose_gap(node.pose_in_start, expected) < 1e-6);
  }
  // Routing works against the edge direction too.
  const auto back = topo_route(graph, 3, 0);
  REQUIRE(back.size() == 4);
  CHECK(back[0].frame_id == 3);
  CHECK(back[3].frame_id == 0);
}

TEST_CASE("a loop closure shortens the route across the square") {
  FrameGraph graph =
      anchors_only_graph({{0, 0, 0}, {4, 0, 0}, {4, 0, 4}, {0, 0, 4}});
  for (int i = 0; i + 1 < 4; ++i) link(graph, i, i + 1);
  const auto without = topo_route(graph, 0, 3);
  CHECK(without.size() == 4);

  link(graph, 3, 0);  // closure
  graph.edges.back().loop_closure = true;
  const auto with = topo_route(graph, 0, 3);
  REQUIRE(with.size() == 2);
  CHECK(with[0].frame_id == 0);
  CHECK(with[1].frame_id == 3);
  const Pose expected = compose(inverse(graph.frames[0].anchor_pose),
                                graph.frames[3].anchor_pose);
  CHECK(pose_gap(with[1].pose_in_start, expected) < 1e-6);
}

TEST_CASE("equal hop counts are broken by summed translation") {
  // Diamond: 0 -> 1 -> 3 is long, 0 -> 2 -> 3 is short.
  FrameGraph graph =
      anchors_only_graph({{0, 0, 0}, {0, 0, 5}, {1, 0, 0}, {2, 0, 0}});
  link(graph, 0, 1);
  link(graph, 1, 3);
  link(graph, 0, 2);
  link(graph, 2, 3);
  const auto route = topo_route(graph, 0, 3);
  REQUIRE(route.size() == 3);
  CHECK(route[1].frame_id == 2);
}

TEST_CASE("routing between disconnected frames reports an error") {
  FrameGraph graph = anchors_only_graph({{0, 0, 0}, {5, 0, 0}, {9, 0, 0}});
  link(graph, 0, 1);
  CHECK_THROWS_AS(topo_route(graph, 0, 2), std::runtime_error);
  CHECK_THROWS_AS(topo_route(graph, 0, 7), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// map export

TEST_CASE("the map listing is complete and byte-stable") {
  FrameGraph graph = square_graph_with_revisit();
  add_loop_edge(graph, 4, 0, 99);

  const std::string path_a = "map_listing_a.txt";
  const std::string path_b = "map_listing_b.txt";
  write_map_text(graph, path_a);
  write_map_text(graph, path_b);

  auto slurp = [](const std::string& p) {
    std::ifstream is(p);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(path_a);
  CHECK(a == slurp(path_b));

  std::istringstream is(a);
  std::string line;
  std::getline(is, line);
  CHECK(line == "local-frame-map v1");
  std::getline(is, line);
  CHECK(line == "nodes 5");
  int nodes = 0, edges = 0;
  while (std::getline(is, line)) {
    if (line.rfind("node ", 0) == 0) ++nodes;
    if (line.rfind("edge ", 0) == 0) ++edges;
  }
  CHECK(nodes == 5);
  CHECK(edges == 5);  // 4 chain edges + 1 closure
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}
