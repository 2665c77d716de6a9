#pragma once

#include <cstdint>
#include <optional>

#include "lfmap/field.hpp"
#include "lfmap/geometry.hpp"

namespace lfmap {

struct RegistrationConfig {
  int max_iters = 30;
  double lambda_reg = 0.001;     // Levenberg-Marquardt damping seed
  double convergence_eps = 1e-5;  // stop when ||delta xi|| drops below
  int subsample_n = 4096;
  double outlier_sdf_cap = 0.3;  // meters; residuals beyond are discarded
  std::uint64_t seed = 0;        // subsampling stream
};

enum class RegistrationStatus {
  kConverged,
  kMaxIters,
  kInsufficientOverlap,  // fewer than 6 usable points
  kDiverged,             // 5 consecutive rejected steps or singular system
};

struct RegistrationResult {
  Pose pose;
  int iterations = 0;
  double final_rmse = 0.0;
  double inlier_fraction = 0.0;
  bool converged = false;
  RegistrationStatus status = RegistrationStatus::kMaxIters;
};

/// Residual r = predicted SDF at the world-frame point, with the pose
/// Jacobian row [p x g; g] matching the Twist layout (rotation first).
/// valid = false when the point is outside the map.
struct PointResidual {
  double r = 0.0;
  Eigen::Matrix<double, 6, 1> J = Eigen::Matrix<double, 6, 1>::Zero();
  bool valid = false;
};
PointResidual residual_and_jacobian(const Eigen::Vector3d& p_world,
                                    const Eigen::Vector3d& color,
                                    const FeatureStore& store,
                                    const NetworkParams& params);

/// Solves (sum J J^T + lambda I) dxi = -sum J r by Cholesky.
/// nullopt when the damped system is not positive definite.
std::optional<Twist> lm_step(const std::vector<double>& residuals,
                             const std::vector<Eigen::Matrix<double, 6, 1>>& jacobians,
                             double lambda);
std::optional<Twist> lm_step(const Eigen::Matrix<double, 6, 6>& H,
                             const Eigen::Matrix<double, 6, 1>& b,
                             double lambda);

/// Aligns the cloud (camera coordinates) to the field. Left-multiplicative
/// updates pose <- exp(dxi) * pose; steps are accepted only when the
/// subsampled RMSE does not increase (damping x10 on reject, x0.5 on accept).
RegistrationResult register_cloud(const ColorPointCloud& cloud,
                                  const FeatureStore& store,
                                  const NetworkParams& params, const Pose& init,
                                  const RegistrationConfig& cfg);

}  // namespace lfmap
