#include "lfmap/field.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "lfmap/rng.hpp"

namespace lfmap {

namespace {

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + e^x), overflow-safe.
inline double softplus1(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

constexpr double kLogitClamp = 15.0;

struct VoxelKeyLess {
  bool operator()(const VoxelKey& a, const VoxelKey& b) const {
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  }
};

}  // namespace

std::optional<Interpolation> interpolate(const Eigen::Vector3d& q,
                                         const FeatureStore& store) {
  const auto hits = store.nearest(q);
  if (hits.empty()) return std::nullopt;

  Interpolation out;
  // Exact hit: the inverse-distance weight diverges, so that neighbor takes
  // the full weight (the limit of the normalized scheme).
  if (hits.front().distance < 1e-9) {
    out.feature = store.at(hits.front().key).feature;
    out.neighbor_keys = {hits.front().key};
    out.weights = {1.0};
    return out;
  }

  double wsum = 0.0;
  out.neighbor_keys.reserve(hits.size());
  out.weights.reserve(hits.size());
  for (const auto& h : hits) {
    const double w = 1.0 / h.distance;
    out.neighbor_keys.push_back(h.key);
    out.weights.push_back(w);
    wsum += w;
  }
  out.feature = Eigen::VectorXd::Zero(store.feature_dim());
  for (std::size_t i = 0; i < out.weights.size(); ++i) {
    out.weights[i] /= wsum;
    out.feature += out.weights[i] * store.at(out.neighbor_keys[i]).feature;
  }
  return out;
}

double loss_bce(double pred_sdf, double label_sdf, double sigma) {
  const double a = std::clamp(pred_sdf / sigma, -kLogitClamp, kLogitClamp);
  const double b = std::clamp(label_sdf / sigma, -kLogitClamp, kLogitClamp);
  const double target = sigmoid(b);
  // -[t ln s(a) + (1-t) ln(1-s(a))] = softplus(a) - a t, stable in a.
  return softplus1(a) - a * target;
}

double loss_eikonal(const Eigen::MatrixXd& grads) {
  if (grads.cols() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grads.cols(); ++i) {
    const double d = grads.col(i).norm() - 1.0;
    acc += d * d;
  }
  return acc / static_cast<double>(grads.cols());
}

double loss_ewc(const NetworkParams& params) {
  if (params.ewc_importance.size() == 0) return 0.0;
  return (params.ewc_importance.array() *
          (params.theta - params.ewc_anchor).array().square())
      .sum();
}

CollatedBatch collate(const SampleBatch& batch, const FeatureStore& store,
                      std::size_t* out_of_map) {
  std::vector<const TrainingSample*> kept;
  std::vector<Interpolation> interps;
  kept.reserve(batch.size());
  interps.reserve(batch.size());
  std::size_t dropped = 0;
  for (const auto& s : batch) {
    auto itp = interpolate(s.position, store);
    if (!itp) {
      ++dropped;
      continue;
    }
    kept.push_back(&s);
    interps.push_back(std::move(*itp));
  }
  if (out_of_map) *out_of_map = dropped;

  CollatedBatch out;
  const Eigen::Index b = static_cast<Eigen::Index>(kept.size());
  out.positions.resize(3, b);
  out.colors.resize(3, b);
  out.features.resize(store.feature_dim(), b);
  out.labels.resize(b);
  out.neighbors.resize(kept.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    out.positions.col(i) = kept[i]->position;
    out.colors.col(i) = kept[i]->color;
    out.features.col(i) = interps[i].feature;
    out.labels(i) = kept[i]->sdf_label;
    auto& nb = out.neighbors[i];
    nb.reserve(interps[i].neighbor_keys.size());
    for (std::size_t j = 0; j < interps[i].neighbor_keys.size(); ++j) {
      nb.emplace_back(interps[i].neighbor_keys[j], interps[i].weights[j]);
    }
  }
  return out;
}

LossBreakdown field_loss_and_gradients(const CollatedBatch& batch,
                                       const NetworkParams& params,
                                       const FieldConfig& cfg,
                                       Eigen::VectorXd* grad_theta,
                                       Eigen::MatrixXd* grad_features) {
  LossBreakdown out;
  const Eigen::Index b = batch.size();
  out.ewc = loss_ewc(params);
  if (b == 0) {
    out.total = cfg.lambda_ewc * out.ewc;
    if (grad_theta) {
      grad_theta->setZero(params.theta.size());
      if (cfg.lambda_ewc != 0.0) {
        *grad_theta += (2.0 * cfg.lambda_ewc) *
                       (params.ewc_importance.array() *
                        (params.theta - params.ewc_anchor).array())
                           .matrix();
      }
    }
    if (grad_features) grad_features->resize(params.arch.feature_dim, 0);
    return out;
  }

  BatchCache cache;
  cache.positions = batch.positions;
  cache.X = encode_inputs(params.arch, batch.positions, batch.colors,
                          batch.features);
  forward_batch(params, cache);
  spatial_gradient_batch(params, cache);

  // Occupancy cross entropy on clamped logits.
  Eigen::RowVectorXd dLdy(b);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double raw = cache.y(i) / cfg.sigma;
    const double a = std::clamp(raw, -kLogitClamp, kLogitClamp);
    const double target =
        sigmoid(std::clamp(batch.labels(i) / cfg.sigma, -kLogitClamp,
                           kLogitClamp));
    out.bce += softplus1(a) - a * target;
    const double da = (std::abs(raw) < kLogitClamp) ? 1.0 / cfg.sigma : 0.0;
    dLdy(i) = cfg.lambda_bce * inv_b * (sigmoid(a) - target) * da;
  }
  out.bce *= inv_b;

  // Gradient-norm regularizer.
  Eigen::MatrixXd dLdg(3, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double n = cache.G3.col(i).norm();
    const double d = n - 1.0;
    out.eikonal += d * d;
    if (n > 1e-12) {
      dLdg.col(i) = cfg.lambda_eikonal * inv_b * 2.0 * d / n * cache.G3.col(i);
    } else {
      dLdg.col(i).setZero();
    }
  }
  out.eikonal *= inv_b;

  out.total = cfg.lambda_bce * out.bce + cfg.lambda_eikonal * out.eikonal +
              cfg.lambda_ewc * out.ewc;

  if (grad_theta || grad_features) {
    Eigen::VectorXd local_grad = Eigen::VectorXd::Zero(params.theta.size());
    Eigen::MatrixXd dX;
    backward_batch(params, cache, dLdy, dLdg, local_grad,
                   grad_features ? &dX : nullptr);
    if (grad_features) {
      *grad_features = dX.bottomRows(params.arch.feature_dim);
    }
    if (grad_theta) {
      if (cfg.lambda_ewc != 0.0) {
        local_grad += (2.0 * cfg.lambda_ewc) *
                      (params.ewc_importance.array() *
                       (params.theta - params.ewc_anchor).array())
                          .matrix();
      }
      *grad_theta = std::move(local_grad);
    }
  }
  return out;
}

void AdamState::update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                       double lr) {
  if (m.size() != theta.size()) {
    m = Eigen::VectorXd::Zero(theta.size());
    v = Eigen::VectorXd::Zero(theta.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

TrainStepResult train_step(const SampleBatch& batch, FeatureStore& store,
                           NetworkParams& params, AdamState& adam,
                           const FieldConfig& cfg) {
  TrainStepResult res;
  CollatedBatch collated = collate(batch, store, &res.out_of_map);
  res.used = static_cast<std::size_t>(collated.size());
  if (res.used == 0) {
    res.loss.ewc = loss_ewc(params);
    res.loss.total = cfg.lambda_ewc * res.loss.ewc;
    return res;
  }

  Eigen::VectorXd grad_theta;
  Eigen::MatrixXd grad_features;
  res.loss = field_loss_and_gradients(collated, params, cfg, &grad_theta,
                                      &grad_features);
  if (!std::isfinite(res.loss.total) || !grad_theta.allFinite()) {
    res.diverged = true;
    return res;
  }
  if (cfg.learning_rate == 0.0) return res;

  adam.update(params.theta, grad_theta, cfg.learning_rate);

  // Scatter feature gradients; ordered keys fix the summation order.
  std::map<VoxelKey, Eigen::VectorXd, VoxelKeyLess> acc;
  for (Eigen::Index i = 0; i < collated.size(); ++i) {
    for (const auto& [key, w] : collated.neighbors[i]) {
      auto it = acc.find(key);
      if (it == acc.end()) {
        acc.emplace(key, w * grad_features.col(i));
      } else {
        it->second += w * grad_features.col(i);
      }
    }
  }
  for (const auto& [key, g] : acc) {
    store.at(key).feature -= cfg.learning_rate * g;
  }
  return res;
}

TrainReport adaptive_train(const SampleBatch& new_samples, ReplayBuffer& buffer,
                           FeatureStore& store, NetworkParams& params,
                           AdamState& adam, const FieldConfig& cfg,
                           std::uint64_t seed) {
  TrainReport report;
  if (new_samples.empty() && buffer.empty()) {
    report.stop_reason = "no_samples";
    return report;
  }

  const double alpha = 2.0 / (cfg.convergence_window + 1.0);
  std::vector<double> ema_history;
  double ema = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const SampleBatch batch =
        mix_replay(buffer, new_samples, cfg.new_fraction,
                   static_cast<std::size_t>(cfg.batch_size),
                   mix_seed(seed, static_cast<std::uint64_t>(iter)));
    const TrainStepResult step = train_step(batch, store, params, adam, cfg);
    ++report.iterations;
    if (step.diverged) {
      report.diverged = true;
      report.stop_reason = "diverged";
      report.final_loss = step.loss.total;
      return report;
    }
    if (iter == 0) {
      report.initial_loss = step.loss.total;
      ema = step.loss.total;
    } else {
      ema = (1.0 - alpha) * ema + alpha * step.loss.total;
    }
    ema_history.push_back(ema);
    report.final_loss = step.loss.total;

    if (iter + 1 >= cfg.convergence_window) {
      const std::size_t back =
          ema_history.size() - static_cast<std::size_t>(cfg.convergence_window);
      const double improvement = ema_history[back] - ema;
      if (improvement < cfg.thres_l) {
        report.stop_reason = "converged";
        return report;
      }
    }
  }
  report.stop_reason = "max_iters";
  return report;
}

void consolidate_ewc(NetworkParams& params,
                     const std::vector<Eigen::VectorXd>& per_sample_grads) {
  params.ewc_anchor = params.theta;
  if (per_sample_grads.empty()) return;
  Eigen::VectorXd mean_sq = Eigen::VectorXd::Zero(params.theta.size());
  for (const auto& g : per_sample_grads) mean_sq += g.cwiseProduct(g);
  mean_sq /= static_cast<double>(per_sample_grads.size());
  if (params.ewc_importance.size() != params.theta.size()) {
    params.ewc_importance = Eigen::VectorXd::Zero(params.theta.size());
  }
  params.ewc_importance += mean_sq;
}

void consolidate_ewc_from_batch(NetworkParams& params, const SampleBatch& batch,
                                const FeatureStore& store,
                                const FieldConfig& cfg,
                                std::size_t max_samples) {
  FieldConfig data_cfg = cfg;
  data_cfg.lambda_ewc = 0.0;  // Fisher over the data terms only
  std::vector<Eigen::VectorXd> grads;
  grads.reserve(std::min(batch.size(), max_samples));
  for (std::size_t i = 0; i < batch.size() && grads.size() < max_samples; ++i) {
    CollatedBatch one = collate({batch[i]}, store, nullptr);
    if (one.size() == 0) continue;
    Eigen::VectorXd g;
    field_loss_and_gradients(one, params, data_cfg, &g, nullptr);
    grads.push_back(std::move(g));
  }
  consolidate_ewc(params, grads);
}

FieldQuery query_field(const Eigen::MatrixXd& positions,
                       const Eigen::MatrixXd& colors,
                       const FeatureStore& store, const NetworkParams& params) {
  const Eigen::Index b = positions.cols();
  FieldQuery out;
  out.sdf = Eigen::RowVectorXd::Zero(b);
  out.grad = Eigen::MatrixXd::Zero(3, b);
  out.valid.assign(static_cast<std::size_t>(b), 0);

  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd feats(store.feature_dim(), b);
  for (Eigen::Index i = 0; i < b; ++i) {
    auto itp = interpolate(positions.col(i), store);
    if (!itp) continue;
    feats.col(static_cast<Eigen::Index>(kept.size())) = itp->feature;
    kept.push_back(i);
  }
  if (kept.empty()) return out;

  const Eigen::Index nk = static_cast<Eigen::Index>(kept.size());
  BatchCache cache;
  cache.positions.resize(3, nk);
  Eigen::MatrixXd cols(3, nk);
  for (Eigen::Index j = 0; j < nk; ++j) {
    cache.positions.col(j) = positions.col(kept[j]);
    if (colors.cols() == b) {
      cols.col(j) = colors.col(kept[j]);
    } else {
      cols.col(j).setZero();
    }
  }
  cache.X = encode_inputs(params.arch, cache.positions, cols,
                          feats.leftCols(nk));
  forward_batch(params, cache);
  spatial_gradient_batch(params, cache);
  for (Eigen::Index j = 0; j < nk; ++j) {
    out.sdf(kept[j]) = cache.y(j);
    out.grad.col(kept[j]) = cache.G3.col(j);
    out.valid[static_cast<std::size_t>(kept[j])] = 1;
  }
  return out;
}

std::optional<FieldOutput> query_point(const Eigen::Vector3d& p,
                                       const FeatureStore& store,
                                       const NetworkParams& params) {
  auto itp = interpolate(p, store);
  if (!itp) return std::nullopt;
  return forward_single(params, p, Eigen::Vector3d::Zero(), itp->feature);
}

}  // namespace lfmap
