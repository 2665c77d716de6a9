#include "lfmap/network.hpp"

#include <cmath>
#include <stdexcept>

#include "lfmap/rng.hpp"

namespace lfmap {

namespace {

// Stable softplus family with slope beta: s(z) = log1p(exp(b z)) / b.
inline double softplus(double z, double b) {
  const double t = b * z;
  if (t > 30.0) return z;
  if (t < -30.0) return std::exp(t) / b;
  return std::log1p(std::exp(t)) / b;
}
inline double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::Index total_params(const std::vector<int>& widths) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<Eigen::Index>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  return n;
}

}  // namespace

std::vector<int> MlpArchitecture::widths() const {
  std::vector<int> w;
  w.push_back(input_dim());
  for (int h : hidden) w.push_back(h);
  w.push_back(1);
  return w;
}

bool MlpArchitecture::operator==(const MlpArchitecture& o) const {
  return feature_dim == o.feature_dim && pe_bands == o.pe_bands &&
         hidden == o.hidden && softplus_beta == o.softplus_beta;
}

NetworkParams NetworkParams::create(const MlpArchitecture& arch,
                                    std::uint64_t seed) {
  NetworkParams p;
  p.arch = arch;
  const auto widths = arch.widths();
  const Eigen::Index n = total_params(widths);
  p.theta = Eigen::VectorXd::Zero(n);
  p.ewc_anchor = Eigen::VectorXd::Zero(n);
  p.ewc_importance = Eigen::VectorXd::Zero(n);

  Rng rng(seed);
  const int layers = p.num_weight_layers();
  for (int l = 0; l < layers; ++l) {
    auto W = p.weight(l);
    if (l == layers - 1) continue;  // zero output layer: untrained sdf == 0
    const double scale = std::sqrt(6.0 / (W.rows() + W.cols()));
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      for (Eigen::Index r = 0; r < W.rows(); ++r) {
        W(r, c) = rng.uniform(-scale, scale);
      }
    }
  }
  return p;
}

std::pair<Eigen::Index, Eigen::Index> NetworkParams::layer_offsets(
    int layer) const {
  const auto widths = arch.widths();
  Eigen::Index off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<Eigen::Index>(widths[l + 1]) * widths[l] + widths[l + 1];
  }
  const Eigen::Index w_off = off;
  const Eigen::Index b_off =
      off + static_cast<Eigen::Index>(widths[layer + 1]) * widths[layer];
  return {w_off, b_off};
}

Eigen::Map<Eigen::MatrixXd> NetworkParams::weight(int layer) {
  const auto widths = arch.widths();
  const auto [w_off, b_off] = layer_offsets(layer);
  return {theta.data() + w_off, widths[layer + 1], widths[layer]};
}
Eigen::Map<const Eigen::MatrixXd> NetworkParams::weight(int layer) const {
  const auto widths = arch.widths();
  const auto [w_off, b_off] = layer_offsets(layer);
  return {theta.data() + w_off, widths[layer + 1], widths[layer]};
}
Eigen::Map<Eigen::VectorXd> NetworkParams::bias(int layer) {
  const auto widths = arch.widths();
  const auto [w_off, b_off] = layer_offsets(layer);
  return {theta.data() + b_off, widths[layer + 1]};
}
Eigen::Map<const Eigen::VectorXd> NetworkParams::bias(int layer) const {
  const auto widths = arch.widths();
  const auto [w_off, b_off] = layer_offsets(layer);
  return {theta.data() + b_off, widths[layer + 1]};
}

Eigen::MatrixXd encode_inputs(const MlpArchitecture& arch,
                              const Eigen::MatrixXd& positions,
                              const Eigen::MatrixXd& colors,
                              const Eigen::MatrixXd& features) {
  const Eigen::Index b = positions.cols();
  if (colors.cols() != b || features.cols() != b ||
      features.rows() != arch.feature_dim) {
    throw std::invalid_argument("encode_inputs: shape mismatch");
  }
  Eigen::MatrixXd X(arch.input_dim(), b);
  X.topRows(3) = positions;
  for (int k = 0; k < arch.pe_bands; ++k) {
    const double w = std::ldexp(1.0, k);  // 2^k rad/m
    X.middleRows(3 + 6 * k, 3) = (w * positions).array().sin();
    X.middleRows(3 + 6 * k + 3, 3) = (w * positions).array().cos();
  }
  X.middleRows(arch.encoded_p_dim(), 3) = colors;
  X.bottomRows(arch.feature_dim) = features;
  return X;
}

void forward_batch(const NetworkParams& params, BatchCache& cache) {
  const int n_h = static_cast<int>(params.arch.hidden.size());
  const double beta = params.arch.softplus_beta;
  cache.Z.assign(n_h, {});
  cache.H.assign(n_h, {});
  cache.SP.assign(n_h, {});
  cache.SPP.assign(n_h, {});

  const Eigen::MatrixXd* prev = &cache.X;
  for (int l = 0; l < n_h; ++l) {
    cache.Z[l].noalias() = params.weight(l) * (*prev);
    cache.Z[l].colwise() += params.bias(l);
    auto& Z = cache.Z[l];
    auto& H = cache.H[l];
    auto& SP = cache.SP[l];
    auto& SPP = cache.SPP[l];
    H.resizeLike(Z);
    SP.resizeLike(Z);
    SPP.resizeLike(Z);
    for (Eigen::Index c = 0; c < Z.cols(); ++c) {
      for (Eigen::Index r = 0; r < Z.rows(); ++r) {
        const double z = Z(r, c);
        const double sp = sigmoid(beta * z);
        H(r, c) = softplus(z, beta);
        SP(r, c) = sp;
        SPP(r, c) = beta * sp * (1.0 - sp);
      }
    }
    prev = &H;
  }
  const int out = n_h;
  cache.y.noalias() = params.weight(out) * (*prev);
  cache.y.array() += params.bias(out)(0);
}

void spatial_gradient_batch(const NetworkParams& params, BatchCache& cache) {
  const int n_h = static_cast<int>(params.arch.hidden.size());
  const Eigen::Index b = cache.batch_size();
  cache.delta.assign(n_h, {});
  cache.msave.assign(n_h, {});

  const Eigen::VectorXd wout = params.weight(n_h).transpose();  // H
  cache.delta[n_h - 1] = cache.SP[n_h - 1].array().colwise() * wout.array();
  for (int l = n_h - 2; l >= 0; --l) {
    cache.msave[l].noalias() = params.weight(l + 1).transpose() * cache.delta[l + 1];
    cache.delta[l] = cache.SP[l].cwiseProduct(cache.msave[l]);
  }
  cache.V.noalias() = params.weight(0).transpose() * cache.delta[0];

  // Chain through the positional encoding: the raw-p rows pass straight
  // through; sin/cos rows carry d/dp = +w cos / -w sin, both already in X.
  cache.G3 = cache.V.topRows(3);
  const int bands = params.arch.pe_bands;
  for (int k = 0; k < bands; ++k) {
    const double w = std::ldexp(1.0, k);
    const auto sin_rows = cache.X.middleRows(3 + 6 * k, 3);
    const auto cos_rows = cache.X.middleRows(3 + 6 * k + 3, 3);
    cache.G3.array() += w * (cos_rows.array() * cache.V.middleRows(3 + 6 * k, 3).array() -
                             sin_rows.array() * cache.V.middleRows(3 + 6 * k + 3, 3).array());
  }
  (void)b;
}

namespace {
Eigen::Map<Eigen::MatrixXd> grad_weight(const NetworkParams& params,
                                        Eigen::VectorXd& grad, int layer) {
  const auto widths = params.arch.widths();
  const auto [w_off, b_off] = params.layer_offsets(layer);
  return {grad.data() + w_off, widths[layer + 1], widths[layer]};
}
Eigen::Map<Eigen::VectorXd> grad_bias(const NetworkParams& params,
                                      Eigen::VectorXd& grad, int layer) {
  const auto widths = params.arch.widths();
  const auto [w_off, b_off] = params.layer_offsets(layer);
  return {grad.data() + b_off, widths[layer + 1]};
}
}  // namespace

void backward_batch(const NetworkParams& params, const BatchCache& cache,
                    const Eigen::RowVectorXd& dLdy, const Eigen::MatrixXd& dLdg,
                    Eigen::VectorXd& grad_theta, Eigen::MatrixXd* dX) {
  const int n_h = static_cast<int>(params.arch.hidden.size());
  const Eigen::Index b = cache.batch_size();
  const bool has_g = dLdg.size() > 0;
  const int D = params.arch.input_dim();

  std::vector<Eigen::MatrixXd> q(n_h);  // second-order cotangents on Z_l

  if (has_g) {
    if (cache.delta.empty()) {
      throw std::logic_error("backward_batch: spatial_gradient_batch not run");
    }
    // Cotangent on V through the encoding chain (transpose of the G3 map).
    Eigen::MatrixXd Rv = Eigen::MatrixXd::Zero(D, b);
    Rv.topRows(3) = dLdg;
    for (int k = 0; k < params.arch.pe_bands; ++k) {
      const double w = std::ldexp(1.0, k);
      const auto sin_rows = cache.X.middleRows(3 + 6 * k, 3);
      const auto cos_rows = cache.X.middleRows(3 + 6 * k + 3, 3);
      Rv.middleRows(3 + 6 * k, 3) = w * cos_rows.cwiseProduct(dLdg);
      Rv.middleRows(3 + 6 * k + 3, 3) = -w * sin_rows.cwiseProduct(dLdg);
    }

    // Reverse pass over the spatial-gradient computation itself.
    Eigen::MatrixXd c_cur;
    c_cur.noalias() = params.weight(0) * Rv;
    grad_weight(params, grad_theta, 0).noalias() += cache.delta[0] * Rv.transpose();
    for (int l = 0; l + 1 < n_h; ++l) {
      q[l] = c_cur.cwiseProduct(cache.msave[l]).cwiseProduct(cache.SPP[l]);
      const Eigen::MatrixXd t = c_cur.cwiseProduct(cache.SP[l]);
      grad_weight(params, grad_theta, l + 1).noalias() +=
          cache.delta[l + 1] * t.transpose();
      c_cur.noalias() = params.weight(l + 1) * t;
    }
    const Eigen::VectorXd wout = params.weight(n_h).transpose();
    q[n_h - 1] = (c_cur.array().colwise() * wout.array()).matrix()
                     .cwiseProduct(cache.SPP[n_h - 1]);
    const Eigen::MatrixXd t_top = c_cur.cwiseProduct(cache.SP[n_h - 1]);
    grad_weight(params, grad_theta, n_h).noalias() +=
        t_top.rowwise().sum().transpose();
  }

  // Standard reverse pass with the second-order cotangents injected.
  Eigen::MatrixXd hat_h;
  if (dLdy.size() > 0) {
    grad_weight(params, grad_theta, n_h).noalias() +=
        dLdy * cache.H[n_h - 1].transpose();
    grad_bias(params, grad_theta, n_h)(0) += dLdy.sum();
    hat_h.noalias() = params.weight(n_h).transpose() * dLdy;
  } else {
    hat_h = Eigen::MatrixXd::Zero(params.arch.widths()[n_h], b);
  }

  for (int l = n_h - 1; l >= 0; --l) {
    Eigen::MatrixXd zhat = hat_h.cwiseProduct(cache.SP[l]);
    if (has_g && q[l].size() > 0) zhat += q[l];
    const Eigen::MatrixXd& prev = (l == 0) ? cache.X : cache.H[l - 1];
    grad_weight(params, grad_theta, l).noalias() += zhat * prev.transpose();
    grad_bias(params, grad_theta, l).noalias() += zhat.rowwise().sum();
    hat_h.noalias() = params.weight(l).transpose() * zhat;
  }
  if (dX) *dX = hat_h;
}

FieldOutput forward_single(const NetworkParams& params,
                           const Eigen::Vector3d& p, const Eigen::Vector3d& c,
                           const Eigen::VectorXd& f) {
  BatchCache cache;
  cache.positions = p;
  cache.X = encode_inputs(params.arch, p, c, f);
  forward_batch(params, cache);
  spatial_gradient_batch(params, cache);
  FieldOutput out;
  out.sdf = cache.y(0);
  out.grad_p = cache.G3.col(0);
  return out;
}

}  // namespace lfmap
