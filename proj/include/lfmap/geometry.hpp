#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

namespace lfmap {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Pinhole camera model. Convention: +z forward, +x right, +y down.
/// depth_scale divides raw depth units to produce meters (TUM: 5000).
struct CameraIntrinsics {
  double focal_x = 0.0;
  double focal_y = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 1.0;

  bool valid() const {
    return focal_x > 0 && focal_y > 0 && width > 0 && height > 0 &&
           center_x >= 0 && center_x < width && center_y >= 0 &&
           center_y < height && depth_scale > 0;
  }
};

/// One RGB-D observation. Images are row-major, width*height.
/// Depth is in meters, 0 marks an invalid pixel.
struct RGBDFrame {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> color;  // RGB in [0,1]
  std::vector<double> depth;           // meters, 0 = invalid
  double timestamp = 0.0;

  const Eigen::Vector3d& color_at(int u, int v) const { return color[v * width + u]; }
  double depth_at(int u, int v) const { return depth[v * width + u]; }
};

/// Colored point set, positions in meters.
struct ColorPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void push(const Eigen::Vector3d& p, const Eigen::Vector3d& c) {
    points.push_back(p);
    colors.push_back(c);
  }
};

/// Twist xi in se(3). Layout [a; tr]: rotational axis-angle part first
/// (radians), translational part second (meters).
struct Twist {
  Eigen::Vector3d rotational = Eigen::Vector3d::Zero();
  Eigen::Vector3d translational = Eigen::Vector3d::Zero();

  Vector6d vector() const {
    Vector6d v;
    v << rotational, translational;
    return v;
  }
  static Twist from_vector(const Vector6d& v) {
    Twist t;
    t.rotational = v.head<3>();
    t.translational = v.tail<3>();
    return t;
  }
  double norm() const { return vector().norm(); }
};

/// Rigid transform in SE(3), rotation stored as an orthonormal matrix.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
  /// Max deviation of R^T R from identity.
  double orthonormality_drift() const;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// exp: se(3) -> SE(3). Rodrigues rotation, V-matrix translation,
/// Taylor fallback below 1e-8 rad.
Pose exp_map(const Twist& xi);

/// log: SE(3) -> se(3). Throws std::domain_error for rotation angles
/// at or beyond pi - 1e-6.
Twist log_map(const Pose& pose);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Re-projects R onto SO(3) via SVD.
void orthonormalize(Pose& pose);

/// Back-projects valid-depth pixels on a stride x stride grid.
/// z = D(u,v), x = (u - cx) z / fx, y = (v - cy) z / fy.
/// Throws std::invalid_argument on image dimension mismatch.
ColorPointCloud backproject(const RGBDFrame& frame, const CameraIntrinsics& intr,
                            int stride = 1);

ColorPointCloud transform_cloud(const Pose& pose, const ColorPointCloud& cloud);

/// Rotation angle of the relative rotation between two poses, radians.
double rotation_angle_between(const Pose& a, const Pose& b);

}  // namespace lfmap
