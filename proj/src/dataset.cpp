#include "lfmap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "lfmap/image_io.hpp"

namespace lfmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAssociationWindow = 0.02;  // s

// ---------------------------------------------------------------------------
// index-file parsing

struct StampedLine {
  double timestamp = 0.0;
  std::vector<std::string> fields;
};

std::vector<StampedLine> read_stamped_lines(const std::string& path,
                                            std::size_t min_fields) {
  std::ifstream is(path);
  if (!is) throw IngestionError("missing index file: " + path);
  std::vector<StampedLine> lines;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    StampedLine out;
    std::string stamp;
    ls >> stamp;
    try {
      out.timestamp = std::stod(stamp);
    } catch (const std::exception&) {
      throw IngestionError("bad timestamp in " + path + ": " + line);
    }
    std::string field;
    while (ls >> field) out.fields.push_back(field);
    if (out.fields.size() < min_fields)
      throw IngestionError("truncated line in " + path + ": " + line);
    lines.push_back(std::move(out));
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const StampedLine& a, const StampedLine& b) {
                     return a.timestamp < b.timestamp;
                   });
  // Strictly increasing stamps: a duplicate keeps its first occurrence.
  lines.erase(std::unique(lines.begin(), lines.end(),
                          [](const StampedLine& a, const StampedLine& b) {
                            return a.timestamp == b.timestamp;
                          }),
              lines.end());
  return lines;
}

CameraIntrinsics guess_intrinsics(const std::string& dir) {
  CameraIntrinsics intr;
  intr.width = 640;
  intr.height = 480;
  intr.depth_scale = 5000.0;
  // Factory calibrations of the three freiburg kinects; the generic 525
  // pinhole otherwise.
  if (dir.find("freiburg1") != std::string::npos || dir.find("fr1") != std::string::npos) {
    intr.focal_x = 517.3; intr.focal_y = 516.5;
    intr.center_x = 318.6; intr.center_y = 255.3;
  } else if (dir.find("freiburg2") != std::string::npos || dir.find("fr2") != std::string::npos) {
    intr.focal_x = 520.9; intr.focal_y = 521.0;
    intr.center_x = 325.1; intr.center_y = 249.7;
  } else if (dir.find("freiburg3") != std::string::npos || dir.find("fr3") != std::string::npos) {
    intr.focal_x = 535.4; intr.focal_y = 539.2;
    intr.center_x = 320.1; intr.center_y = 247.6;
  } else {
    intr.focal_x = 525.0; intr.focal_y = 525.0;
    intr.center_x = 319.5; intr.center_y = 239.5;
  }
  return intr;
}

bool read_intrinsics_file(const std::string& path, CameraIntrinsics& intr) {
  std::ifstream is(path);
  if (!is) return false;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    CameraIntrinsics out;
    if (!(ls >> out.focal_x >> out.focal_y >> out.center_x >> out.center_y >>
          out.depth_scale))
      throw IngestionError("bad intrinsics file: " + path);
    if (!(ls >> out.width >> out.height)) {
      out.width = 640;
      out.height = 480;
    }
    if (!out.valid()) throw IngestionError("invalid intrinsics in " + path);
    intr = out;
    return true;
  }
  throw IngestionError("empty intrinsics file: " + path);
}

Eigen::Quaterniond canonical_quaternion(const Pose& pose) {
  Eigen::Quaterniond q(pose.rotation);
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace

std::string tum_pose_line(double timestamp, const Pose& pose) {
  const Eigen::Quaterniond q = canonical_quaternion(pose);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f", timestamp,
                pose.translation.x(), pose.translation.y(),
                pose.translation.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

TumSequence load_tum(const std::string& dir, int max_frames) {
  TumSequence seq;
  seq.root = dir;

  const auto color = read_stamped_lines(dir + "/rgb.txt", 1);
  const auto depth = read_stamped_lines(dir + "/depth.txt", 1);
  const auto truth = read_stamped_lines(dir + "/groundtruth.txt", 7);

  // Nearest-stamp association, greedy and one-to-one in time order: each
  // color frame takes the closest unclaimed depth frame within the window.
  std::size_t j = 0;
  for (const StampedLine& c : color) {
    if (depth.empty()) break;
    while (j + 1 < depth.size() &&
           std::abs(depth[j + 1].timestamp - c.timestamp) <
               std::abs(depth[j].timestamp - c.timestamp))
      ++j;
    if (j >= depth.size()) break;
    if (std::abs(depth[j].timestamp - c.timestamp) <= kAssociationWindow) {
      AssociatedTriple t;
      t.timestamp = c.timestamp;
      t.color_path = c.fields[0];
      t.depth_path = depth[j].fields[0];
      seq.triples.push_back(std::move(t));
      ++j;  // consumed
      if (j >= depth.size()) break;
    }
  }
  if (seq.triples.empty())
    throw EmptySequenceError("no color/depth pairs within " +
                             std::to_string(kAssociationWindow) + " s in " + dir);
  if (max_frames > 0 && seq.triples.size() > static_cast<std::size_t>(max_frames))
    seq.triples.resize(static_cast<std::size_t>(max_frames));

  seq.ground_truth.reserve(truth.size());
  for (const StampedLine& g : truth) {
    GroundTruthPose gt;
    gt.timestamp = g.timestamp;
    gt.pose.translation = Eigen::Vector3d(std::stod(g.fields[0]),
                                          std::stod(g.fields[1]),
                                          std::stod(g.fields[2]));
    Eigen::Quaterniond q(std::stod(g.fields[6]), std::stod(g.fields[3]),
                         std::stod(g.fields[4]), std::stod(g.fields[5]));
    const double n = q.norm();
    if (n < 1e-9) throw IngestionError("degenerate quaternion in " + dir);
    q.coeffs() /= n;
    gt.pose.rotation = q.toRotationMatrix();
    seq.ground_truth.push_back(std::move(gt));
  }

  if (!read_intrinsics_file(dir + "/intrinsics.txt", seq.intrinsics))
    seq.intrinsics = guess_intrinsics(dir);
  return seq;
}

RGBDFrame load_frame(const TumSequence& seq, std::size_t index) {
  const AssociatedTriple& t = seq.triples.at(index);
  RGBDFrame frame;
  frame.timestamp = t.timestamp;
  int cw = 0, ch = 0, dw = 0, dh = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<std::uint16_t> raw;
  try {
    rgb = read_png_rgb8(seq.root + "/" + t.color_path, cw, ch);
    raw = read_png_gray16(seq.root + "/" + t.depth_path, dw, dh);
  } catch (const std::runtime_error& e) {
    throw IngestionError(e.what());
  }
  if (cw != dw || ch != dh)
    throw IngestionError("color/depth dimensions disagree for " + t.color_path);
  if (cw != seq.intrinsics.width || ch != seq.intrinsics.height)
    throw IngestionError("image size does not match the intrinsics for " +
                         t.color_path);
  frame.width = cw;
  frame.height = ch;
  const std::size_t n = static_cast<std::size_t>(cw) * ch;
  frame.color.resize(n);
  frame.depth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    frame.color[i] = Eigen::Vector3d(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]) / 255.0;
    frame.depth[i] = raw[i] / seq.intrinsics.depth_scale;
  }
  return frame;
}

std::vector<GroundTruthPose> load_pose_file(const std::string& path) {
  const auto lines = read_stamped_lines(path, 7);
  std::vector<GroundTruthPose> out;
  out.reserve(lines.size());
  for (const StampedLine& g : lines) {
    GroundTruthPose gt;
    gt.timestamp = g.timestamp;
    gt.pose.translation = Eigen::Vector3d(std::stod(g.fields[0]),
                                          std::stod(g.fields[1]),
                                          std::stod(g.fields[2]));
    Eigen::Quaterniond q(std::stod(g.fields[6]), std::stod(g.fields[3]),
                         std::stod(g.fields[4]), std::stod(g.fields[5]));
    const double n = q.norm();
    if (n < 1e-9) throw IngestionError("degenerate quaternion in " + path);
    q.coeffs() /= n;
    gt.pose.rotation = q.toRotationMatrix();
    out.push_back(std::move(gt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

struct FreeBox {
  Eigen::Vector3d c, h;  // free space is this box's interior
};
struct SolidBox {
  Eigen::Vector3d c, h;
};
struct SolidSphere {
  Eigen::Vector3d c;
  double r = 1.0;
};

// Rooms (free boxes) first, then solid boxes, then spheres.
struct Geometry {
  std::vector<FreeBox> rooms;
  std::vector<SolidBox> boxes;
  std::vector<SolidSphere> spheres;
};

double box_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& c,
               const Eigen::Vector3d& h) {
  const Eigen::Vector3d q = (p - c).cwiseAbs() - h;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

/// Ray/box slab intersection; returns false when the line misses.
bool ray_box_span(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                  const Eigen::Vector3d& c, const Eigen::Vector3d& h,
                  double& t0, double& t1) {
  t0 = -kInf;
  t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a] - c[a]) > h[a]) return false;
      continue;
    }
    double ta = (c[a] - h[a] - o[a]) / d[a];
    double tb = (c[a] + h[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double ray_sphere_enter(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                        const Eigen::Vector3d& c, double r) {
  const Eigen::Vector3d oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return kInf;
  const double t = -b - std::sqrt(disc);
  return t > 1e-9 ? t : kInf;
}

/// Camera-to-world pose at eye looking toward target; +z forward, +y down,
/// +x right.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d f = (target - eye).normalized();
  Eigen::Vector3d down(0, 1, 0);
  if (std::abs(f.dot(down)) > 0.999) down = Eigen::Vector3d(0, 0, 1);
  const Eigen::Vector3d x = down.cross(f).normalized();
  const Eigen::Vector3d y = f.cross(x);
  Pose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = y;
  p.rotation.col(2) = f;
  p.translation = eye;
  return p;
}

/// Pose at a horizontal heading given in whole degrees; the integer
/// normalization makes repeated headings bit-identical (the loop-square
/// closure relies on it).
Pose heading_pose(const Eigen::Vector3d& pos, int heading_deg) {
  const int d = ((heading_deg % 360) + 360) % 360;
  const double rad = d * M_PI / 180.0;
  const Eigen::Vector3d forward(std::cos(rad), 0.0, std::sin(rad));
  return look_at(pos, pos + forward);
}

CameraIntrinsics synth_intrinsics() {
  CameraIntrinsics intr;
  intr.width = 81;
  intr.height = 61;
  intr.focal_x = 70.0;
  intr.focal_y = 70.0;
  // Principal point on an exact pixel so the center ray is axis-aligned.
  intr.center_x = 40.0;
  intr.center_y = 30.0;
  intr.depth_scale = 5000.0;
  return intr;
}

const Eigen::Vector3d kPalette[6] = {
    {0.75, 0.72, 0.65}, {0.30, 0.45, 0.75}, {0.80, 0.35, 0.25},
    {0.35, 0.65, 0.30}, {0.70, 0.55, 0.25}, {0.55, 0.35, 0.65},
};

SynthScene assemble(std::string name, std::vector<Pose> trajectory, Geometry geo) {
  SynthScene scene;
  scene.name = std::move(name);
  scene.intrinsics = synth_intrinsics();
  scene.trajectory = std::move(trajectory);
  const std::size_t objects =
      geo.rooms.size() + geo.boxes.size() + geo.spheres.size();
  scene.palette.reserve(objects);
  for (std::size_t i = 0; i < objects; ++i)
    scene.palette.push_back(kPalette[i % 6]);

  // Exact in free space away from room junctions; near a junction the
  // per-room max underestimates the true wall distance, which keeps ray
  // marching against it conservative (it never steps through a surface).
  scene.sdf = [geo](const Eigen::Vector3d& p) {
    double s = kInf;
    if (!geo.rooms.empty()) {
      s = -kInf;
      for (const FreeBox& r : geo.rooms) s = std::max(s, -box_sdf(p, r.c, r.h));
    }
    for (const SolidBox& b : geo.boxes) s = std::min(s, box_sdf(p, b.c, b.h));
    for (const SolidSphere& sp : geo.spheres)
      s = std::min(s, (p - sp.c).norm() - sp.r);
    return s;
  };

  scene.raycast = [geo](const Eigen::Vector3d& o,
                        const Eigen::Vector3d& d) -> SynthScene::Hit {
    double best = kInf;
    int obj = -1;
    if (!geo.rooms.empty()) {
      // The camera sits in the union of the room interiors: chain the room
      // spans that cover t = 0 forward and take the point where coverage
      // ends as the wall hit.
      double exit = 0.0;
      int exit_obj = -1;
      bool grew = true;
      while (grew) {
        grew = false;
        for (std::size_t i = 0; i < geo.rooms.size(); ++i) {
          double t0, t1;
          if (!ray_box_span(o, d, geo.rooms[i].c, geo.rooms[i].h, t0, t1)) continue;
          if (t0 <= exit + 1e-12 && t1 > exit) {
            exit = t1;
            exit_obj = static_cast<int>(i);
            grew = true;
          }
        }
      }
      if (exit_obj < 0) return {0.0, -1};  // camera outside the free space
      best = exit;
      obj = exit_obj;
    }
    const int box_base = static_cast<int>(geo.rooms.size());
    for (std::size_t i = 0; i < geo.boxes.size(); ++i) {
      double t0, t1;
      if (!ray_box_span(o, d, geo.boxes[i].c, geo.boxes[i].h, t0, t1)) continue;
      if (t0 > 1e-9 && t0 < best) {
        best = t0;
        obj = box_base + static_cast<int>(i);
      }
    }
    const int sphere_base = box_base + static_cast<int>(geo.boxes.size());
    for (std::size_t i = 0; i < geo.spheres.size(); ++i) {
      const double t = ray_sphere_enter(o, d, geo.spheres[i].c, geo.spheres[i].r);
      if (t < best) {
        best = t;
        obj = sphere_base + static_cast<int>(i);
      }
    }
    if (!std::isfinite(best) || obj < 0) return {0.0, -1};
    return {best, obj};
  };
  return scene;
}

SynthScene make_sphere_orbit() {
  Geometry geo;
  geo.spheres = {{Eigen::Vector3d::Zero(), 2.0}};
  // A gentle 24-degree arc at radius 3: the viewpoint drifts slowly enough
  // that neither the translation nor the rotation spawn trigger fires before
  // the per-frame observation cap does.
  const int n = 150;
  const double sweep = 24.0 * M_PI / 180.0;
  std::vector<Pose> traj;
  traj.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double phi = sweep * i / (n - 1);
    const Eigen::Vector3d eye(3.0 * std::sin(phi), 0.0, -3.0 * std::cos(phi));
    traj.push_back(look_at(eye, Eigen::Vector3d::Zero()));
  }
  return assemble("sphere-orbit", std::move(traj), std::move(geo));
}

SynthScene make_box_room() {
  Geometry geo;
  geo.rooms = {{{0, -0.3, 0}, {3, 1.5, 2.5}}};
  geo.boxes = {{{1.0, 0.7, 0.8}, {0.4, 0.5, 0.3}},
               {{-1.8, 0.9, -1.6}, {0.3, 0.3, 0.3}}};
  const int n = 40;
  std::vector<Pose> traj;
  traj.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d eye(-1.6 + 0.012 * i, 0.0, -1.4 + 0.02 * i);
    const double theta = 0.15 + 0.006 * i;
    traj.push_back(look_at(eye, eye + Eigen::Vector3d(std::sin(theta), 0.08,
                                                      std::cos(theta))));
  }
  return assemble("box-room", std::move(traj), std::move(geo));
}

SynthScene make_corridor_scene() {
  Geometry geo;
  geo.rooms = {{{0, -0.05, 0}, {4.5, 1.25, 1.0}}};
  geo.boxes = {{{-1.5, 0.8, -0.75}, {0.3, 0.4, 0.25}},
               {{1.8, 0.85, 0.7}, {0.25, 0.35, 0.3}}};
  const int n = 60;
  std::vector<Pose> traj;
  traj.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d eye(-3.0 + 0.09 * i, 0.0, 0.0);
    const Eigen::Vector3d dir(1.0, 0.06, 0.05 * std::sin(0.15 * i));
    traj.push_back(look_at(eye, eye + dir));
  }
  return assemble("corridor", std::move(traj), std::move(geo));
}

SynthScene make_two_rooms() {
  Geometry geo;
  geo.rooms = {{{-2.15, -0.15, 0}, {2.05, 1.35, 2.0}},
               {{2.15, -0.15, 0}, {2.05, 1.35, 2.0}},
               {{0, 0.1, 0}, {0.15, 1.1, 0.5}}};  // the doorway
  geo.boxes = {{{-2.2, 0.8, -1.2}, {0.3, 0.4, 0.3}},
               {{2.5, 0.75, 1.0}, {0.35, 0.45, 0.3}}};
  const int n = 70;
  std::vector<Pose> traj;
  traj.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d eye(-3.1 + 0.09 * i, 0.0, 0.0);
    const Eigen::Vector3d dir(1.0, 0.05, 0.04 * std::sin(0.13 * i));
    traj.push_back(look_at(eye, eye + dir));
  }
  return assemble("two-rooms", std::move(traj), std::move(geo));
}

SynthScene make_loop_square() {
  Geometry geo;
  geo.rooms = {{{0, -0.2, 0}, {4, 1.4, 4}}};
  geo.boxes = {{{0, -0.2, 0}, {0.5, 1.4, 0.5}},       // floor-to-ceiling pillar
               {{3.5, 0.7, -2.0}, {0.5, 0.5, 0.4}},   // wall texture
               {{-2.0, 0.8, 3.45}, {0.4, 0.4, 0.55}}};
  // A 3 m square walked tangentially: 18 straight steps per side, then a
  // 90-degree in-place turn in 15 steps of 6 degrees. Headings are whole
  // degrees, so the final pose reproduces the first one bit for bit.
  const Eigen::Vector3d corners[4] = {
      {1.5, 0, 1.5}, {-1.5, 0, 1.5}, {-1.5, 0, -1.5}, {1.5, 0, -1.5}};
  const int headings[4] = {180, 270, 360, 450};
  std::vector<Pose> traj;
  traj.reserve(4 * (18 + 15));
  for (int s = 0; s < 4; ++s) {
    const double rad = headings[s] * M_PI / 180.0;
    const Eigen::Vector3d dir(std::cos(rad), 0.0, std::sin(rad));
    for (int k = 0; k < 18; ++k)
      traj.push_back(heading_pose(corners[s] + dir * (k / 6.0), headings[s]));
    for (int j = 1; j <= 15; ++j)
      traj.push_back(heading_pose(corners[(s + 1) % 4], headings[s] + 6 * j));
  }
  return assemble("loop-square", std::move(traj), std::move(geo));
}

}  // namespace

SynthScene synth_world(const std::string& spec) {
  if (spec == "sphere-orbit") return make_sphere_orbit();
  if (spec == "box-room") return make_box_room();
  if (spec == "corridor") return make_corridor_scene();
  if (spec == "two-rooms") return make_two_rooms();
  if (spec == "loop-square") return make_loop_square();
  throw std::invalid_argument("unknown synthetic scene: " + spec);
}

RGBDFrame render_synth(const SynthScene& scene, std::size_t index) {
  const CameraIntrinsics& intr = scene.intrinsics;
  const Pose& pose = scene.trajectory.at(index);
  RGBDFrame frame;
  frame.width = intr.width;
  frame.height = intr.height;
  frame.timestamp = index * scene.frame_dt;
  const std::size_t n = static_cast<std::size_t>(intr.width) * intr.height;
  frame.color.assign(n, Eigen::Vector3d::Zero());
  frame.depth.assign(n, 0.0);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Eigen::Vector3d ray_cam((u - intr.center_x) / intr.focal_x,
                                    (v - intr.center_y) / intr.focal_y, 1.0);
      const double norm = ray_cam.norm();
      const Eigen::Vector3d dir_world = pose.rotation * (ray_cam / norm);
      const SynthScene::Hit hit = scene.raycast(pose.translation, dir_world);
      if (hit.object < 0 || hit.t <= 0) continue;
      const std::size_t i = static_cast<std::size_t>(v) * intr.width + u;
      frame.depth[i] = hit.t / norm;  // ray length -> z-depth
      frame.color[i] = scene.palette[static_cast<std::size_t>(hit.object)];
    }
  }
  return frame;
}

void write_synth_dataset(const SynthScene& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir + "/rgb");
  fs::create_directories(dir + "/depth");
  std::ofstream rgb_idx(dir + "/rgb.txt");
  std::ofstream depth_idx(dir + "/depth.txt");
  std::ofstream truth_idx(dir + "/groundtruth.txt");
  if (!rgb_idx || !depth_idx || !truth_idx)
    throw IngestionError("cannot create dataset files in " + dir);
  rgb_idx << "# color images\n# timestamp filename\n";
  depth_idx << "# depth images, raw / 5000 = meters\n# timestamp filename\n";
  truth_idx << "# ground truth trajectory\n# timestamp tx ty tz qx qy qz qw\n";

  const int w = scene.intrinsics.width, h = scene.intrinsics.height;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  std::vector<std::uint16_t> raw(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) {
    const RGBDFrame frame = render_synth(scene, i);
    for (std::size_t p = 0; p < raw.size(); ++p) {
      const double units = std::round(frame.depth[p] * scene.intrinsics.depth_scale);
      raw[p] = static_cast<std::uint16_t>(std::clamp(units, 0.0, 65535.0));
      for (int c = 0; c < 3; ++c)
        rgb[3 * p + c] = static_cast<std::uint8_t>(
            std::clamp(std::round(frame.color[p][c] * 255.0), 0.0, 255.0));
    }
    char stamp[32];
    std::snprintf(stamp, sizeof(stamp), "%.6f", frame.timestamp);
    write_png_rgb8(dir + "/rgb/" + stamp + ".png", w, h, rgb);
    write_png_gray16(dir + "/depth/" + stamp + ".png", w, h, raw);
    rgb_idx << stamp << " rgb/" << stamp << ".png\n";
    depth_idx << stamp << " depth/" << stamp << ".png\n";
    truth_idx << tum_pose_line(frame.timestamp, scene.trajectory[i]) << "\n";
  }

  std::ofstream intr_file(dir + "/intrinsics.txt");
  intr_file << "# fx fy cx cy depth_scale width height\n";
  intr_file << scene.intrinsics.focal_x << ' ' << scene.intrinsics.focal_y << ' '
            << scene.intrinsics.center_x << ' ' << scene.intrinsics.center_y
            << ' ' << scene.intrinsics.depth_scale << ' ' << w << ' ' << h
            << "\n";
  if (!intr_file) throw IngestionError("cannot write intrinsics in " + dir);
}

ObservationSource make_source(const TumSequence& seq) {
  ObservationSource src;
  src.intrinsics = seq.intrinsics;
  src.timestamps.reserve(seq.triples.size());
  for (const AssociatedTriple& t : seq.triples) src.timestamps.push_back(t.timestamp);
  src.frame = [seq](std::size_t i) { return load_frame(seq, i); };
  return src;
}

ObservationSource make_source(const SynthScene& scene) {
  ObservationSource src;
  src.intrinsics = scene.intrinsics;
  src.timestamps.reserve(scene.trajectory.size());
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i)
    src.timestamps.push_back(i * scene.frame_dt);
  src.frame = [scene](std::size_t i) { return render_synth(scene, i); };
  return src;
}

ObservationSource make_static_source(const SynthScene& scene, std::size_t count) {
  ObservationSource src;
  src.intrinsics = scene.intrinsics;
  for (std::size_t i = 0; i < count; ++i)
    src.timestamps.push_back(i * scene.frame_dt);
  src.frame = [scene](std::size_t i) {
    RGBDFrame frame = render_synth(scene, 0);
    frame.timestamp = i * scene.frame_dt;
    return frame;
  };
  return src;
}

}  // namespace lfmap
