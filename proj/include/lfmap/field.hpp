#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lfmap/feature_store.hpp"
#include "lfmap/network.hpp"
#include "lfmap/sampler.hpp"

namespace lfmap {

/// Training hyperparameters for the SDF field.
struct FieldConfig {
  MlpArchitecture arch;
  double sigma = 0.05;           // sigmoid scale for occupancy labels (m)
  double lambda_bce = 1.0;
  double lambda_eikonal = 0.5;
  double lambda_ewc = 0.1;
  double learning_rate = 1e-3;   // adaptive-moment for theta, plain GD for f
  double thres_l = 1e-4;         // smoothed-improvement stop threshold
  int max_iters = 300;
  int batch_size = 1024;
  int convergence_window = 10;
  double new_fraction = 0.3;     // share of each batch drawn from new samples
  double feature_init_scale = 0.01;
};

/// Inverse-distance interpolated feature plus the neighbors and normalized
/// weights that produced it (needed to scatter feature gradients back).
struct Interpolation {
  Eigen::VectorXd feature;
  std::vector<VoxelKey> neighbor_keys;
  std::vector<double> weights;  // sum to 1
};

/// w_k = 1/||p_k - q||, normalized. A neighbor closer than 1e-9 returns that
/// feature exactly. nullopt when no stored point is within the query shell.
std::optional<Interpolation> interpolate(const Eigen::Vector3d& q,
                                         const FeatureStore& store);

/// Cross entropy between sigmoid(pred/sigma) and sigmoid(label/sigma);
/// logits clamped to +-15.
double loss_bce(double pred_sdf, double label_sdf, double sigma);

/// Mean over columns of (||g|| - 1)^2.
double loss_eikonal(const Eigen::MatrixXd& grads);

/// Sum_i G_i (theta_i - anchor_i)^2.
double loss_ewc(const NetworkParams& params);

/// Training batch collated into matrix form. `neighbors` keeps, per kept
/// sample, the (voxel, weight) pairs used for its feature.
struct CollatedBatch {
  Eigen::MatrixXd positions;  // 3 x B
  Eigen::MatrixXd colors;     // 3 x B
  Eigen::MatrixXd features;   // m x B
  Eigen::VectorXd labels;     // B
  std::vector<std::vector<std::pair<VoxelKey, double>>> neighbors;
  Eigen::Index size() const { return labels.size(); }
};

/// Interpolates every sample against the store, dropping the out-of-map ones.
CollatedBatch collate(const SampleBatch& batch, const FeatureStore& store,
                      std::size_t* out_of_map = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double eikonal = 0.0;
  double ewc = 0.0;
};

/// Weighted loss on a collated batch; optionally accumulates d(total)/dtheta
/// into grad_theta (resized and zeroed) and writes d(total)/dfeature per
/// sample into grad_features (m x B).
LossBreakdown field_loss_and_gradients(const CollatedBatch& batch,
                                       const NetworkParams& params,
                                       const FieldConfig& cfg,
                                       Eigen::VectorXd* grad_theta = nullptr,
                                       Eigen::MatrixXd* grad_features = nullptr);

/// Adaptive-moment optimizer state for theta. Lives outside checkpoints.
struct AdamState {
  Eigen::VectorXd m, v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

struct TrainStepResult {
  LossBreakdown loss;          // evaluated before the step
  std::size_t used = 0;        // samples inside the map
  std::size_t out_of_map = 0;  // dropped samples
  bool diverged = false;       // non-finite loss; no update applied
};

/// One optimization step: theta by adaptive moments, neighbor features by
/// plain gradient descent with their interpolation weights (fixed voxel-key
/// order, so summation is deterministic).
TrainStepResult train_step(const SampleBatch& batch, FeatureStore& store,
                           NetworkParams& params, AdamState& adam,
                           const FieldConfig& cfg);

struct TrainReport {
  int iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string stop_reason;  // converged | max_iters | diverged | no_samples
  bool diverged = false;
};

/// Runs train_step on batches mixed from new samples and the replay buffer
/// until the smoothed loss improvement over a convergence_window falls below
/// thres_l, or max_iters is hit.
TrainReport adaptive_train(const SampleBatch& new_samples, ReplayBuffer& buffer,
                           FeatureStore& store, NetworkParams& params,
                           AdamState& adam, const FieldConfig& cfg,
                           std::uint64_t seed);

/// theta* <- theta and G <- G + mean_i(g_i^2) over per-sample data-loss
/// gradients (diagonal empirical Fisher; squared form).
void consolidate_ewc(NetworkParams& params,
                     const std::vector<Eigen::VectorXd>& per_sample_grads);

/// Convenience wrapper: computes per-sample gradients of the data terms
/// (occupancy + gradient-norm losses) for up to max_samples samples.
void consolidate_ewc_from_batch(NetworkParams& params, const SampleBatch& batch,
                                const FeatureStore& store,
                                const FieldConfig& cfg,
                                std::size_t max_samples = 256);

/// Batched read-only field query; out-of-map columns get valid = 0.
struct FieldQuery {
  Eigen::RowVectorXd sdf;
  Eigen::MatrixXd grad;  // 3 x B
  std::vector<std::uint8_t> valid;
};
FieldQuery query_field(const Eigen::MatrixXd& positions,
                       const Eigen::MatrixXd& colors,
                       const FeatureStore& store, const NetworkParams& params);

/// Single-point query; nullopt when out of map.
std::optional<FieldOutput> query_point(const Eigen::Vector3d& p,
                                       const FeatureStore& store,
                                       const NetworkParams& params);

}  // namespace lfmap
