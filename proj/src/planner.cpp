#include "lfmap/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace lfmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double disc_distance(const Obstacle& o, const Eigen::Vector3d& p) {
  const double dx = p.x() - o.center.x();
  const double dz = p.z() - o.center.z();
  return std::hypot(dx, dz) - o.size.x();
}

double box_distance(const Obstacle& o, const Eigen::Vector3d& p) {
  const double qx = std::abs(p.x() - o.center.x()) - o.size.x();
  const double qz = std::abs(p.z() - o.center.z()) - o.size.z();
  if (qx <= 0.0 && qz <= 0.0) return std::max(qx, qz);  // inside
  return std::hypot(std::max(qx, 0.0), std::max(qz, 0.0));
}

}  // namespace

double AnalyticWorld::clearance(const Eigen::Vector3d& p) const {
  double best = kInf;
  for (const Obstacle& o : obstacles_) {
    const double d = o.type == Obstacle::kDisc ? disc_distance(o, p)
                                               : box_distance(o, p);
    best = std::min(best, d);
  }
  return best;
}

double FieldWorld::clearance(const Eigen::Vector3d& p) const {
  const auto out = query_point(anchor_inv_.apply(p), *store_, *params_);
  if (!out) return strict_ ? -kInf : kInf;
  return out->sdf;
}

CompositeWorld::CompositeWorld(std::vector<const World*> parts)
    : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("composite world is empty");
  bounds_ = parts_.front()->bounds();
  for (const World* w : parts_) bounds_.extend(w->bounds());
}

double CompositeWorld::clearance(const Eigen::Vector3d& p) const {
  double best = kInf;
  for (const World* w : parts_) best = std::min(best, w->clearance(p));
  return best;
}

namespace {

bool segment_clear(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                   const World& world, double delta, double threshold) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (delta / 2))));
  const Eigen::AlignedBox3d& bounds = world.bounds();
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const Eigen::Vector3d p = a + t * (b - a);
    if (!bounds.contains(p)) return false;
    if (world.clearance(p) < threshold) return false;
  }
  return true;
}

/// The planner's internal test: clearance fields are 1-Lipschitz, so asking
/// for delta + spacing/2 at the samples guarantees the whole segment clears
/// delta — returned paths survive re-validation at any finer sampling.
bool planner_clear(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                   const World& world, double delta) {
  return segment_clear(a, b, world, delta, delta + delta / 4);
}

}  // namespace

bool collision_free(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                    const World& world, double delta) {
  return segment_clear(a, b, world, delta, delta);
}

Eigen::Vector3d GoalSampler::sample(const Eigen::Vector3d& current,
                                    const Eigen::Vector3d& goal,
                                    const Eigen::AlignedBox3d& bounds) {
  const double height = current.y();
  auto flatten = [&](Eigen::Vector3d p) {
    if (cfg_.planar) p.y() = height;
    return p;
  };
  auto clamp = [&](Eigen::Vector3d p) {
    return flatten(p.cwiseMax(bounds.min()).cwiseMin(bounds.max()));
  };

  const double u = rng_.uniform();
  const Eigen::Vector3d to_goal = flatten(goal) - flatten(current);
  const double dist = to_goal.norm();

  if (u < cfg_.goal_bias && dist > 1e-12) {
    // Ray fan: index sequence 0, +1, -1, ..., +K, -K, round-robin.
    const int cursor = ray_cursor_;
    ray_cursor_ = (ray_cursor_ + 1) % (2 * cfg_.n_alt_rays + 1);
    const int k = (cursor + 1) / 2 * (cursor % 2 == 1 ? 1 : -1);
    const Eigen::Vector3d dir =
        Eigen::AngleAxisd(k * cfg_.alpha, Eigen::Vector3d::UnitY()) *
        (to_goal / dist);
    const double range = rng_.uniform(0.0, dist);
    return clamp(current + range * dir);
  }
  if (u < cfg_.goal_bias + cfg_.uniform_fallback) {
    Eigen::Vector3d p;
    for (int i = 0; i < 3; ++i)
      p[i] = rng_.uniform(bounds.min()[i], bounds.max()[i]);
    return flatten(p);
  }

  // Informed region: ellipsoid with foci at current and goal, major diameter
  // 1.5x their separation (a fixed-eccentricity prior before any solution).
  const Eigen::Vector3d center = 0.5 * (flatten(current) + flatten(goal));
  const double a_semi = std::max(0.75 * dist, 1e-6);
  const double c_semi = 0.5 * dist;
  const double b_semi = std::sqrt(std::max(a_semi * a_semi - c_semi * c_semi, 1e-12));
  Eigen::Vector3d axis = dist > 1e-12 ? (to_goal / dist).eval()
                                      : Eigen::Vector3d::UnitX().eval();
  // Unit-ball sample (disc when planar), scaled onto the ellipsoid axes.
  Eigen::Vector3d ball;
  do {
    ball.x() = rng_.uniform(-1.0, 1.0);
    ball.y() = cfg_.planar ? 0.0 : rng_.uniform(-1.0, 1.0);
    ball.z() = rng_.uniform(-1.0, 1.0);
  } while (ball.squaredNorm() > 1.0);
  const Eigen::Quaterniond rot =
      Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitX(), axis);
  const Eigen::Vector3d offset =
      rot * Eigen::Vector3d(a_semi * ball.x(), b_semi * ball.y(), b_semi * ball.z());
  return clamp(center + offset);
}

namespace {

struct Tree {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<int> parent;
  std::vector<double> cost;

  int add(const Eigen::Vector3d& p, int par, double c) {
    nodes.push_back(p);
    parent.push_back(par);
    cost.push_back(c);
    return static_cast<int>(nodes.size()) - 1;
  }
  int nearest(const Eigen::Vector3d& p) const {
    int best = 0;
    double best_d2 = (nodes[0] - p).squaredNorm();
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      const double d2 = (nodes[i] - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
};

std::vector<Eigen::Vector3d> extract_path(const Tree& tree, int leaf,
                                          const Eigen::Vector3d& goal) {
  std::vector<Eigen::Vector3d> path;
  for (int v = leaf; v != -1; v = tree.parent[static_cast<std::size_t>(v)])
    path.push_back(tree.nodes[static_cast<std::size_t>(v)]);
  std::reverse(path.begin(), path.end());
  if ((path.back() - goal).norm() > 1e-12) path.push_back(goal);
  return path;
}

/// Greedy shortcutting: from each kept waypoint, jump to the farthest later
/// waypoint still reachable on a straight free segment.
std::vector<Eigen::Vector3d> shortcut(const std::vector<Eigen::Vector3d>& path,
                                      const World& world, double delta) {
  if (path.size() <= 2) return path;
  std::vector<Eigen::Vector3d> out;
  std::size_t i = 0;
  out.push_back(path[0]);
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    for (; j > i + 1; --j)
      if (planner_clear(path[i], path[j], world, delta)) break;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

/// Splits long segments so consecutive gaps stay <= 1.5 * step_size.
std::vector<Eigen::Vector3d> rediscretize(const std::vector<Eigen::Vector3d>& path,
                                          double step_size) {
  const double max_gap = 1.5 * step_size;
  std::vector<Eigen::Vector3d> out;
  if (path.empty()) return out;
  out.push_back(path[0]);
  for (std::size_t s = 1; s < path.size(); ++s) {
    const Eigen::Vector3d& a = path[s - 1];
    const Eigen::Vector3d& b = path[s];
    const double len = (b - a).norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / max_gap)));
    for (int i = 1; i <= pieces; ++i)
      out.push_back(a + (static_cast<double>(i) / pieces) * (b - a));
  }
  return out;
}

double path_length(const std::vector<Eigen::Vector3d>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i)
    len += (path[i] - path[i - 1]).norm();
  return len;
}

/// Shared RRT* tree-growth loop; the two planners differ in the sampler and
/// in post-processing: the goal-directed planner shortcut-smooths its result,
/// while the conventional baseline returns the raw first-solution tree path
/// (shortcutting is not part of standard RRT*).
template <typename SampleFn>
PlanResult rrt_star(const Eigen::Vector3d& start_in,
                    const Eigen::Vector3d& goal_in, const World& world,
                    const PlannerConfig& cfg, bool smooth,
                    SampleFn&& draw_sample) {
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::Vector3d start = start_in, goal = goal_in;
  if (cfg.planar) goal.y() = start.y();

  if (!world.bounds().contains(start) || world.clearance(start) < cfg.clearance)
    throw std::invalid_argument("plan: start violates the clearance margin");

  PlanResult result;
  Tree tree;
  tree.add(start, -1, 0.0);

  int solution = -1;
  int iterations = 0;
  for (; iterations < cfg.max_iterations && solution < 0; ++iterations) {
    const Eigen::Vector3d target = draw_sample(tree);
    const int near_id = tree.nearest(target);
    const Eigen::Vector3d& near = tree.nodes[static_cast<std::size_t>(near_id)];
    Eigen::Vector3d step = target - near;
    const double dist = step.norm();
    if (dist < 1e-12) continue;
    const Eigen::Vector3d fresh =
        dist > cfg.step_size ? (near + (cfg.step_size / dist) * step).eval()
                             : target;
    if (!planner_clear(near, fresh, world, cfg.clearance)) continue;

    // Parent choice: cheapest collision-free connection in the rewire ball.
    int parent = near_id;
    double base = tree.cost[static_cast<std::size_t>(near_id)] + (fresh - near).norm();
    std::vector<int> neighbors;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if ((tree.nodes[i] - fresh).norm() > cfg.rewire_radius) continue;
      neighbors.push_back(static_cast<int>(i));
      const double c = tree.cost[i] + (tree.nodes[i] - fresh).norm();
      if (c < base - 1e-12 &&
          planner_clear(tree.nodes[i], fresh, world, cfg.clearance)) {
        parent = static_cast<int>(i);
        base = c;
      }
    }
    const int fresh_id = tree.add(fresh, parent, base);

    // Rewire: route neighbors through the new node when strictly cheaper.
    for (const int i : neighbors) {
      const double through = base + (tree.nodes[static_cast<std::size_t>(i)] - fresh).norm();
      if (through < tree.cost[static_cast<std::size_t>(i)] - 1e-12 &&
          planner_clear(fresh, tree.nodes[static_cast<std::size_t>(i)], world,
                         cfg.clearance)) {
        tree.parent[static_cast<std::size_t>(i)] = fresh_id;
        tree.cost[static_cast<std::size_t>(i)] = through;
      }
    }

    if ((fresh - goal).norm() <= cfg.goal_tolerance &&
        planner_clear(fresh, goal, world, cfg.clearance))
      solution = fresh_id;
  }

  result.iterations = iterations;
  result.tree_size = static_cast<int>(tree.nodes.size());
  result.tree_nodes = tree.nodes;
  result.tree_parents = tree.parent;
  if (solution >= 0) {
    auto path = extract_path(tree, solution, goal);
    if (smooth) path = shortcut(path, world, cfg.clearance);
    path = rediscretize(path, cfg.step_size);
    result.path = std::move(path);
    result.length = path_length(result.path);
    result.success = true;
  }
  const auto t1 = std::chrono::steady_clock::now();
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

}  // namespace

PlanResult plan(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                const World& world, const PlannerConfig& cfg,
                std::uint64_t seed) {
  GoalSampler sampler(cfg, mix_seed(seed, 0x676f616cULL));
  Eigen::Vector3d flat_goal = goal;
  if (cfg.planar) flat_goal.y() = start.y();
  // The fan is anchored at the search frontier: the tree node currently
  // closest to the goal. While that node keeps improving, sampling stays on
  // its goal ray and the frontier marches straight; once blocked, the
  // round-robin sweeps the alternative rays from the stuck node until one
  // breaks through, the frontier moves, and the schedule snaps back to the
  // goal ray. If every ray from the frontier is blocked, the uniform and
  // informed draws keep growing the tree until a new node takes the lead.
  Eigen::Vector3d front = start;
  if (cfg.planar) front.y() = start.y();
  double best = std::numeric_limits<double>::infinity();
  std::size_t seen = 0;
  return rrt_star(start, goal, world, cfg, /*smooth=*/true, [&](const Tree& tree) {
    bool improved = false;
    for (; seen < tree.nodes.size(); ++seen) {
      const double d = (tree.nodes[seen] - flat_goal).norm();
      if (d < best - 1e-12) {
        best = d;
        front = tree.nodes[seen];
        improved = true;
      }
    }
    if (improved) sampler.reset_schedule();
    return sampler.sample(front, goal, world.bounds());
  });
}

PlanResult baseline_plan(const Eigen::Vector3d& start,
                         const Eigen::Vector3d& goal, const World& world,
                         const PlannerConfig& cfg, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x62617365ULL));
  const Eigen::AlignedBox3d& bounds = world.bounds();
  return rrt_star(start, goal, world, cfg, /*smooth=*/false, [&](const Tree&) {
    if (rng.uniform() < 0.05) {
      Eigen::Vector3d g = goal;
      if (cfg.planar) g.y() = start.y();
      return g;
    }
    Eigen::Vector3d p;
    for (int i = 0; i < 3; ++i) p[i] = rng.uniform(bounds.min()[i], bounds.max()[i]);
    if (cfg.planar) p.y() = start.y();
    return p;
  });
}

PlanResult plan_with_topo(const Eigen::Vector3d& start_world,
                          const Eigen::Vector3d& goal_world,
                          const FrameGraph& graph, const WorldProvider& worlds,
                          const PlannerConfig& cfg, std::uint64_t seed) {
  if (graph.frames.empty())
    throw std::invalid_argument("plan_with_topo: empty frame graph");
  auto nearest_frame = [&](const Eigen::Vector3d& p) {
    int best = 0;
    double best_d = kInf;
    for (const LocalFrame& f : graph.frames) {
      const double d = (f.anchor_pose.translation - p).norm();
      if (d < best_d) {
        best_d = d;
        best = f.id;
      }
    }
    return best;
  };
  const int start_frame = nearest_frame(start_world);
  const int goal_frame = nearest_frame(goal_world);
  const auto route = topo_route(graph, start_frame, goal_frame);

  PlanResult total;
  std::vector<const World*> parts;
  std::vector<Eigen::Vector3d> stitched;
  Eigen::Vector3d current = start_world;
  for (std::size_t leg = 0; leg < route.size(); ++leg) {
    const int frame_id = route[leg].frame_id;
    const World& world = worlds(frame_id);
    parts.push_back(&world);
    Eigen::Vector3d target =
        leg + 1 < route.size()
            ? graph.frames[static_cast<std::size_t>(route[leg + 1].frame_id)]
                  .anchor_pose.translation
            : goal_world;
    if (cfg.planar) target.y() = start_world.y();

    const PlanResult segment =
        plan(current, target, world, cfg, mix_seed(seed, leg));
    total.iterations += segment.iterations;
    total.tree_size += segment.tree_size;
    total.runtime_ms += segment.runtime_ms;
    const int offset = static_cast<int>(total.tree_nodes.size());
    total.tree_nodes.insert(total.tree_nodes.end(), segment.tree_nodes.begin(),
                            segment.tree_nodes.end());
    for (const int parent : segment.tree_parents)
      total.tree_parents.push_back(parent < 0 ? -1 : parent + offset);
    if (!segment.success) {
      total.success = false;
      total.failed_segment = static_cast<int>(leg);
      return total;
    }
    for (std::size_t i = stitched.empty() ? 0 : 1; i < segment.path.size(); ++i)
      stitched.push_back(segment.path[i]);
    current = segment.path.back();
  }

  const CompositeWorld combined(parts);
  stitched = shortcut(stitched, combined, cfg.clearance);
  stitched = rediscretize(stitched, cfg.step_size);
  total.path = std::move(stitched);
  total.length = path_length(total.path);
  total.success = true;
  return total;
}

BenchmarkWorld make_corridor_world() {
  BenchmarkWorld bw;
  bw.world.mutable_bounds() = Eigen::AlignedBox3d(Eigen::Vector3d(-5, -1, -2.2),
                                                  Eigen::Vector3d(5, 1, 4.2));
  // A flat wall splits the map, pierced by one narrow doorway centered on the
  // start-goal line. The doorway half-gap (0.32) sits just above the
  // planner's conservative margin of delta + delta/4 = 0.3125, so the direct
  // route is admissible but only down a thin axial sliver; the only
  // alternative is the long climb over the wall top (about 1.4x longer).
  // A goal-directed search marches its frontier straight down the axis and
  // through the doorway, while an undirected one must blindly align a sample
  // chain with the sliver -- its flat faces offer no guidance -- and usually
  // finds the roof route first.
  const double half_gap = 0.32;
  const double wall_top = 3.2;
  const double z_min = -2.2;
  auto slab = [](double z_lo, double z_hi) {
    Obstacle o;
    o.type = Obstacle::kBox;
    o.center = Eigen::Vector3d(0, 0, 0.5 * (z_lo + z_hi));
    o.size = Eigen::Vector3d(0.15, 0, 0.5 * (z_hi - z_lo));
    return o;
  };
  bw.world.obstacles() = {slab(z_min, -half_gap), slab(half_gap, wall_top)};
  bw.start = Eigen::Vector3d(-4, 0, 0);
  bw.goal = Eigen::Vector3d(4, 0, 0);
  return bw;
}

void save_world(const BenchmarkWorld& bw, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write world file: " + path);
  os << std::setprecision(17);
  const auto& b = bw.world.bounds();
  os << "world v1\n";
  os << "bounds " << b.min().x() << ' ' << b.min().y() << ' ' << b.min().z()
     << ' ' << b.max().x() << ' ' << b.max().y() << ' ' << b.max().z() << "\n";
  os << "start " << bw.start.x() << ' ' << bw.start.y() << ' ' << bw.start.z()
     << "\n";
  os << "goal " << bw.goal.x() << ' ' << bw.goal.y() << ' ' << bw.goal.z()
     << "\n";
  for (const Obstacle& o : bw.world.obstacles()) {
    if (o.type == Obstacle::kDisc)
      os << "obstacle disc " << o.center.x() << ' ' << o.center.y() << ' '
         << o.center.z() << ' ' << o.size.x() << "\n";
    else
      os << "obstacle box " << o.center.x() << ' ' << o.center.y() << ' '
         << o.center.z() << ' ' << o.size.x() << ' ' << o.size.y() << ' '
         << o.size.z() << "\n";
  }
  if (!os) throw std::runtime_error("failed writing world file: " + path);
}

BenchmarkWorld load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read world file: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "world v1")
    throw std::runtime_error("bad world file header: " + path);

  BenchmarkWorld bw;
  std::vector<Obstacle> obstacles;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "bounds") {
      Eigen::Vector3d lo, hi;
      ls >> lo.x() >> lo.y() >> lo.z() >> hi.x() >> hi.y() >> hi.z();
      bw.world.mutable_bounds() = Eigen::AlignedBox3d(lo, hi);
    } else if (tag == "start") {
      ls >> bw.start.x() >> bw.start.y() >> bw.start.z();
    } else if (tag == "goal") {
      ls >> bw.goal.x() >> bw.goal.y() >> bw.goal.z();
    } else if (tag == "obstacle") {
      std::string kind;
      Obstacle o;
      ls >> kind >> o.center.x() >> o.center.y() >> o.center.z();
      if (kind == "disc") {
        o.type = Obstacle::kDisc;
        ls >> o.size.x();
      } else if (kind == "box") {
        o.type = Obstacle::kBox;
        ls >> o.size.x() >> o.size.y() >> o.size.z();
      } else {
        throw std::runtime_error("unknown obstacle kind: " + kind);
      }
      obstacles.push_back(o);
    } else {
      throw std::runtime_error("unknown world directive: " + tag);
    }
    if (ls.fail()) throw std::runtime_error("malformed world line: " + line);
  }
  bw.world.obstacles() = std::move(obstacles);
  return bw;
}

}  // namespace lfmap
