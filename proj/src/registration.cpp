#include "lfmap/registration.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "lfmap/rng.hpp"

namespace lfmap {

PointResidual residual_and_jacobian(const Eigen::Vector3d& p_world,
                                    const Eigen::Vector3d& color,
                                    const FeatureStore& store,
                                    const NetworkParams& params) {
  PointResidual out;
  auto itp = interpolate(p_world, store);
  if (!itp) return out;
  const FieldOutput f = forward_single(params, p_world, color, itp->feature);
  out.r = f.sdf;
  out.J.head<3>() = p_world.cross(f.grad_p);
  out.J.tail<3>() = f.grad_p;
  out.valid = true;
  return out;
}

std::optional<Twist> lm_step(const Eigen::Matrix<double, 6, 6>& H,
                             const Eigen::Matrix<double, 6, 1>& b,
                             double lambda) {
  Eigen::Matrix<double, 6, 6> A = H;
  A.diagonal().array() += lambda;
  // Pivoted Cholesky tolerates the semidefinite case (H from few points);
  // the residual check rejects inconsistent singular systems.
  Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(A);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::Matrix<double, 6, 1> dxi = ldlt.solve(-b);
  if (!dxi.allFinite()) return std::nullopt;
  const double defect = (A * dxi + b).norm();
  if (defect > 1e-8 * std::max(1.0, b.norm())) return std::nullopt;
  return Twist::from_vector(dxi);
}

std::optional<Twist> lm_step(const std::vector<double>& residuals,
                             const std::vector<Eigen::Matrix<double, 6, 1>>& jacobians,
                             double lambda) {
  Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    H.noalias() += jacobians[i] * jacobians[i].transpose();
    b.noalias() += jacobians[i] * residuals[i];
  }
  return lm_step(H, b, lambda);
}

namespace {

struct Evaluation {
  Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  double rmse = 0.0;
  std::size_t usable = 0;
};

Evaluation evaluate(const Eigen::MatrixXd& points_cam,
                    const Eigen::MatrixXd& colors, const Pose& pose,
                    const FeatureStore& store, const NetworkParams& params,
                    double sdf_cap) {
  const Eigen::Index n = points_cam.cols();
  Eigen::MatrixXd world(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    world.col(i) = pose.rotation * points_cam.col(i) + pose.translation;
  }
  const FieldQuery q = query_field(world, colors, store, params);

  Evaluation ev;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!q.valid[static_cast<std::size_t>(i)]) continue;
    const double r = q.sdf(i);
    if (std::abs(r) > sdf_cap) continue;
    Eigen::Matrix<double, 6, 1> J;
    const Eigen::Vector3d g = q.grad.col(i);
    const Eigen::Vector3d w = world.col(i);
    J.head<3>() = w.cross(g);
    J.tail<3>() = g;
    ev.H.noalias() += J * J.transpose();
    ev.b.noalias() += J * r;
    sq += r * r;
    ++ev.usable;
  }
  if (ev.usable > 0) ev.rmse = std::sqrt(sq / static_cast<double>(ev.usable));
  return ev;
}

}  // namespace

RegistrationResult register_cloud(const ColorPointCloud& cloud,
                                  const FeatureStore& store,
                                  const NetworkParams& params, const Pose& init,
                                  const RegistrationConfig& cfg) {
  RegistrationResult res;
  res.pose = init;

  // Fixed subsample for the whole call keeps accept/reject comparable.
  const std::size_t total = cloud.points.size();
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  const std::size_t n_use =
      std::min<std::size_t>(total, static_cast<std::size_t>(cfg.subsample_n));
  if (n_use < total) {
    Rng rng(mix_seed(cfg.seed, 0x5eb5a1));
    for (std::size_t i = 0; i < n_use; ++i) {  // partial Fisher-Yates
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(total - i)));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n_use);
    std::sort(idx.begin(), idx.end());
  }

  Eigen::MatrixXd pts(3, static_cast<Eigen::Index>(idx.size()));
  Eigen::MatrixXd cols(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    pts.col(static_cast<Eigen::Index>(i)) = cloud.points[idx[i]];
    cols.col(static_cast<Eigen::Index>(i)) = cloud.colors[idx[i]];
  }

  Evaluation cur = evaluate(pts, cols, res.pose, store, params,
                            cfg.outlier_sdf_cap);
  if (cur.usable < 6) {
    res.status = RegistrationStatus::kInsufficientOverlap;
    res.final_rmse = cur.rmse;
    return res;
  }

  double lambda = cfg.lambda_reg;
  int consecutive_rejects = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    std::optional<Twist> dxi;
    int raises = 0;
    while (!(dxi = lm_step(cur.H, cur.b, lambda)) && raises < 5) {
      lambda *= 10.0;
      ++raises;
    }
    if (!dxi) {
      res.status = RegistrationStatus::kDiverged;
      break;
    }
    ++res.iterations;

    Pose candidate = compose(exp_map(*dxi), res.pose);
    orthonormalize(candidate);
    const Evaluation cand = evaluate(pts, cols, candidate, store, params,
                                     cfg.outlier_sdf_cap);
    const bool accept = cand.usable >= 6 && cand.rmse <= cur.rmse;
    if (accept) {
      res.pose = candidate;
      cur = cand;
      lambda = std::max(lambda * 0.5, 1e-9);
      consecutive_rejects = 0;
    }
    // A vanishing proposal means the normal equations are satisfied at the
    // current damping; stop whether or not the step was worth taking.
    if (dxi->norm() < cfg.convergence_eps) {
      res.converged = true;
      res.status = RegistrationStatus::kConverged;
      break;
    }
    if (!accept) {
      lambda *= 10.0;
      if (++consecutive_rejects >= 5) {
        res.status = RegistrationStatus::kDiverged;
        break;
      }
    }
  }

  res.final_rmse = cur.rmse;
  res.inlier_fraction =
      idx.empty() ? 0.0
                  : static_cast<double>(cur.usable) /
                        static_cast<double>(idx.size());
  if (!res.converged && res.status != RegistrationStatus::kDiverged &&
      res.status != RegistrationStatus::kInsufficientOverlap) {
    res.status = RegistrationStatus::kMaxIters;
  }
  return res;
}

}  // namespace lfmap
