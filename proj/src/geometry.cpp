#include "lfmap/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace lfmap {

namespace {
constexpr double kSmallAngle = 1e-8;
constexpr double kDriftTolerance = 1e-7;
}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

double Pose::orthonormality_drift() const {
  Eigen::Matrix3d e = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return e.cwiseAbs().maxCoeff();
}

Pose exp_map(const Twist& xi) {
  const Eigen::Vector3d& a = xi.rotational;
  const double theta = a.norm();
  const Eigen::Matrix3d A = skew(a);

  Pose out;
  if (theta < kSmallAngle) {
    // Second-order Taylor of Rodrigues and V around theta = 0.
    out.rotation = Eigen::Matrix3d::Identity() + A + 0.5 * A * A;
    Eigen::Matrix3d V =
        Eigen::Matrix3d::Identity() + 0.5 * A + (1.0 / 6.0) * A * A;
    out.translation = V * xi.translational;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    out.rotation = Eigen::Matrix3d::Identity() + (s / theta) * A +
                   ((1.0 - c) / t2) * A * A;
    Eigen::Matrix3d V = Eigen::Matrix3d::Identity() + ((1.0 - c) / t2) * A +
                        ((theta - s) / (t2 * theta)) * A * A;
    out.translation = V * xi.translational;
  }
  return out;
}

Twist log_map(const Pose& pose) {
  const Eigen::Matrix3d& R = pose.rotation;
  const double cos_theta =
      std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta >= M_PI - 1e-6) {
    throw std::domain_error("log_map: rotation angle near pi is singular");
  }

  Twist xi;
  Eigen::Matrix3d A;  // skew(a)
  if (theta < kSmallAngle) {
    A = 0.5 * (R - R.transpose());
    xi.rotational = Eigen::Vector3d(A(2, 1), A(0, 2), A(1, 0));
    Eigen::Matrix3d Vinv =
        Eigen::Matrix3d::Identity() - 0.5 * A + (1.0 / 12.0) * A * A;
    xi.translational = Vinv * pose.translation;
  } else {
    A = theta / (2.0 * std::sin(theta)) * (R - R.transpose());
    xi.rotational = Eigen::Vector3d(A(2, 1), A(0, 2), A(1, 0));
    const double t2 = theta * theta;
    const double half = 0.5 * theta;
    const double coeff =
        (1.0 - theta * std::cos(half) / (2.0 * std::sin(half))) / t2;
    Eigen::Matrix3d Vinv =
        Eigen::Matrix3d::Identity() - 0.5 * A + coeff * A * A;
    xi.translational = Vinv * pose.translation;
  }
  return xi;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (out.orthonormality_drift() > kDriftTolerance) {
    orthonormalize(out);
  }
  return out;
}

Pose inverse(const Pose& a) {
  Pose out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

void orthonormalize(Pose& pose) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  pose.rotation = R;
}

ColorPointCloud backproject(const RGBDFrame& frame, const CameraIntrinsics& intr,
                            int stride) {
  if (frame.width != intr.width || frame.height != intr.height ||
      frame.color.size() != frame.depth.size() ||
      frame.depth.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw std::invalid_argument("backproject: image dimension mismatch");
  }
  if (stride < 1) {
    throw std::invalid_argument("backproject: stride must be >= 1");
  }

  ColorPointCloud cloud;
  cloud.points.reserve((frame.width / stride + 1) * (frame.height / stride + 1));
  cloud.colors.reserve(cloud.points.capacity());
  for (int v = 0; v < frame.height; v += stride) {
    for (int u = 0; u < frame.width; u += stride) {
      const double z = frame.depth_at(u, v);
      if (z <= 0.0) continue;
      const double x = (u - intr.center_x) * z / intr.focal_x;
      const double y = (v - intr.center_y) * z / intr.focal_y;
      cloud.push({x, y, z}, frame.color_at(u, v));
    }
  }
  return cloud;
}

ColorPointCloud transform_cloud(const Pose& pose, const ColorPointCloud& cloud) {
  ColorPointCloud out;
  out.points.reserve(cloud.size());
  out.colors = cloud.colors;
  for (const auto& p : cloud.points) {
    out.points.push_back(pose.apply(p));
  }
  return out;
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  const Eigen::Matrix3d rel = a.rotation.transpose() * b.rotation;
  const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace lfmap
