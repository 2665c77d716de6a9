#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lfmap {

/// MLP shape: input is [enc(p), c, f] where enc(p) applies a low-frequency
/// sin/cos positional encoding (frequencies 2^k rad/m) on top of raw p.
/// Hidden layers use softplus, whose gradient never vanishes, so the Eikonal
/// term stays trainable everywhere. Scalar SDF output.
struct MlpArchitecture {
  int feature_dim = 8;
  int pe_bands = 4;
  std::vector<int> hidden{64, 64, 64, 64};
  double softplus_beta = 10.0;

  int encoded_p_dim() const { return 3 + 6 * pe_bands; }
  int input_dim() const { return encoded_p_dim() + 3 + feature_dim; }
  /// [input_dim, hidden..., 1]
  std::vector<int> widths() const;
  bool operator==(const MlpArchitecture& o) const;
};

/// Flat parameter block: theta plus the EWC anchor theta* and diagonal
/// importance G (zero until the first consolidation).
struct NetworkParams {
  MlpArchitecture arch;
  Eigen::VectorXd theta;
  Eigen::VectorXd ewc_anchor;
  Eigen::VectorXd ewc_importance;

  /// Xavier-initialized hidden layers; the output layer starts at zero so an
  /// untrained network predicts sdf = 0 everywhere.
  static NetworkParams create(const MlpArchitecture& arch, std::uint64_t seed);

  int num_weight_layers() const { return static_cast<int>(arch.hidden.size()) + 1; }
  Eigen::Index param_count() const { return theta.size(); }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  /// Offsets into theta for (weight, bias) of a layer; used by checkpoint IO
  /// and the finite-difference tests.
  std::pair<Eigen::Index, Eigen::Index> layer_offsets(int layer) const;
};

/// Per-batch activations and gradient-pass caches. Columns are samples.
struct BatchCache {
  Eigen::MatrixXd positions;  // 3 x B, raw p (needed for the encoding chain)
  Eigen::MatrixXd X;          // input_dim x B, encoded inputs
  std::vector<Eigen::MatrixXd> Z;    // pre-activations per hidden layer
  std::vector<Eigen::MatrixXd> H;    // activations per hidden layer
  std::vector<Eigen::MatrixXd> SP;   // sigma'(Z)
  std::vector<Eigen::MatrixXd> SPP;  // sigma''(Z)
  Eigen::RowVectorXd y;              // 1 x B predictions
  std::vector<Eigen::MatrixXd> delta;  // d y / d Z_l
  std::vector<Eigen::MatrixXd> msave;  // W_{l+1}^T delta_{l+1}
  Eigen::MatrixXd V;   // input_dim x B, d y / d x
  Eigen::MatrixXd G3;  // 3 x B, d y / d p (through the encoding)

  Eigen::Index batch_size() const { return X.cols(); }
};

/// Builds encoded inputs from raw positions (3xB), colors (3xB) and
/// interpolated features (mxB).
Eigen::MatrixXd encode_inputs(const MlpArchitecture& arch,
                              const Eigen::MatrixXd& positions,
                              const Eigen::MatrixXd& colors,
                              const Eigen::MatrixXd& features);

/// Forward pass. cache.positions and cache.X must be set.
void forward_batch(const NetworkParams& params, BatchCache& cache);

/// Exact reverse-mode d y / d p per sample; fills cache.delta/msave/V/G3.
void spatial_gradient_batch(const NetworkParams& params, BatchCache& cache);

/// Full backward pass, including the second-order path through the spatial
/// gradient (needed because the Eikonal loss consumes G3).
///   dLdy : 1 x B cotangent on predictions (may be empty for eikonal-only)
///   dLdg : 3 x B cotangent on spatial gradients (may be empty)
/// Accumulates into grad_theta (must be param_count, zero-initialized by the
/// caller) and optionally dX (input cotangents, input_dim x B; the feature
/// rows drive the per-point feature updates).
void backward_batch(const NetworkParams& params, const BatchCache& cache,
                    const Eigen::RowVectorXd& dLdy, const Eigen::MatrixXd& dLdg,
                    Eigen::VectorXd& grad_theta, Eigen::MatrixXd* dX);

/// Single-query convenience: prediction and spatial gradient.
struct FieldOutput {
  double sdf = 0.0;
  Eigen::Vector3d grad_p = Eigen::Vector3d::Zero();
};

FieldOutput forward_single(const NetworkParams& params,
                           const Eigen::Vector3d& p, const Eigen::Vector3d& c,
                           const Eigen::VectorXd& f);

}  // namespace lfmap
