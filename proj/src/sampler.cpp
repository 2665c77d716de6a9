#include "lfmap/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "lfmap/rng.hpp"

namespace lfmap {

namespace {
constexpr double kMinDepth = 1e-6;

// Shirley-Chiu concentric map: unit square -> unit disk, uniform by area.
void concentric_disk(double u1, double u2, double& dx, double& dy) {
  const double ox = 2.0 * u1 - 1.0;
  const double oy = 2.0 * u2 - 1.0;
  if (ox == 0.0 && oy == 0.0) {
    dx = dy = 0.0;
    return;
  }
  double r, phi;
  if (std::abs(ox) > std::abs(oy)) {
    r = ox;
    phi = (M_PI / 4.0) * (oy / ox);
  } else {
    r = oy;
    phi = (M_PI / 2.0) - (M_PI / 4.0) * (ox / oy);
  }
  dx = r * std::cos(phi);
  dy = r * std::sin(phi);
}

// Any orthonormal pair spanning the plane with normal n (unit).
void plane_basis(const Eigen::Vector3d& n, Eigen::Vector3d& t1,
                 Eigen::Vector3d& t2) {
  const Eigen::Vector3d ref = std::abs(n.x()) < 0.9
                                  ? Eigen::Vector3d::UnitX()
                                  : Eigen::Vector3d::UnitY();
  t1 = n.cross(ref).normalized();
  t2 = n.cross(t1);
}
}  // namespace

std::vector<TrainingSample> sample_rays(const ColorPointCloud& cloud,
                                        const Eigen::Vector3d& camera_origin,
                                        const SamplerConfig& cfg,
                                        std::uint64_t rng_seed, int frame_index,
                                        RaySampleStats* stats) {
  Rng rng(rng_seed);
  std::vector<TrainingSample> out;
  out.reserve(cloud.size() * (cfg.n_front + cfg.n_behind));

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const Eigen::Vector3d ray = p - camera_origin;
    const double d = ray.norm();
    if (d < kMinDepth) {
      if (stats) ++stats->skipped_zero_depth;
      continue;
    }
    for (int k = 0; k < cfg.n_front; ++k) {
      const double l = rng.uniform(cfg.l_front_lo, cfg.l_front_hi);
      TrainingSample s;
      s.position = camera_origin + l * ray;
      s.color = cloud.colors[i];
      s.sdf_label = (1.0 - l) * d;
      s.tag = SampleTag::kFront;
      s.frame_index = frame_index;
      out.push_back(s);
    }
    for (int k = 0; k < cfg.n_behind; ++k) {
      const double l = rng.uniform(cfg.l_behind_lo, 1.0 + cfg.l_b);
      TrainingSample s;
      s.position = camera_origin + l * ray;
      s.color = cloud.colors[i];
      s.sdf_label = (1.0 - l) * d;
      s.tag = SampleTag::kBehind;
      s.frame_index = frame_index;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<TrainingSample> sample_surface_plane(
    const ColorPointCloud& cloud, const Eigen::Vector3d& camera_origin,
    const SamplerConfig& cfg, std::uint64_t rng_seed, int frame_index,
    RaySampleStats* stats) {
  Rng rng(rng_seed);
  std::vector<TrainingSample> out;
  out.reserve(cloud.size() * cfg.n_surface);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const Eigen::Vector3d to_cam = camera_origin - p;
    const double d = to_cam.norm();
    if (d < kMinDepth) {
      if (stats) ++stats->skipped_zero_depth;
      continue;
    }
    const Eigen::Vector3d n = to_cam / d;
    Eigen::Vector3d t1, t2;
    plane_basis(n, t1, t2);
    for (int k = 0; k < cfg.n_surface; ++k) {
      double dx, dy;
      concentric_disk(rng.uniform(), rng.uniform(), dx, dy);
      TrainingSample s;
      s.position = p + cfg.surface_radius * (dx * t1 + dy * t2);
      s.color = cloud.colors[i];
      s.sdf_label = 0.0;
      s.tag = SampleTag::kSurface;
      s.frame_index = frame_index;
      out.push_back(s);
    }
  }
  return out;
}

void ReplayBuffer::add(const std::vector<TrainingSample>& samples) {
  for (const auto& s : samples) {
    by_frame_[s.frame_index].push_back(s);
  }
  size_ += samples.size();
  evict_if_needed();
}

void ReplayBuffer::clear() {
  by_frame_.clear();
  size_ = 0;
}

std::vector<int> ReplayBuffer::stored_frames() const {
  std::vector<int> ids;
  ids.reserve(by_frame_.size());
  for (const auto& [id, v] : by_frame_) {
    if (!v.empty()) ids.push_back(id);
  }
  return ids;
}

const std::vector<TrainingSample>& ReplayBuffer::frame_samples(
    int frame_index) const {
  static const std::vector<TrainingSample> kEmpty;
  auto it = by_frame_.find(frame_index);
  return it == by_frame_.end() ? kEmpty : it->second;
}

void ReplayBuffer::evict_if_needed() {
  // Thin oldest frames down to the per-frame floor, never below it.
  auto it = by_frame_.begin();
  while (size_ > capacity_ && it != by_frame_.end()) {
    auto& v = it->second;
    if (v.size() > min_keep_) {
      const std::size_t want = size_ - capacity_;
      const std::size_t removable = v.size() - min_keep_;
      const std::size_t n = std::min(want, removable);
      v.erase(v.begin(), v.begin() + n);
      size_ -= n;
    }
    ++it;
  }
}

SampleBatch mix_replay(ReplayBuffer& buffer,
                       const std::vector<TrainingSample>& new_samples,
                       double new_fraction, std::size_t batch_size,
                       std::uint64_t rng_seed) {
  if (buffer.empty() && new_samples.empty()) {
    throw std::invalid_argument("mix_replay: no samples available");
  }
  Rng rng(rng_seed);
  const std::vector<int> frames = buffer.stored_frames();

  SampleBatch batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const bool take_new =
        !new_samples.empty() &&
        (frames.empty() || rng.uniform() < new_fraction);
    if (take_new) {
      batch.push_back(new_samples[rng.uniform_int(
          static_cast<int>(new_samples.size()))]);
    } else {
      const int fid = frames[rng.uniform_int(static_cast<int>(frames.size()))];
      const auto& pool = buffer.frame_samples(fid);
      batch.push_back(pool[rng.uniform_int(static_cast<int>(pool.size()))]);
    }
  }
  return batch;
}

}  // namespace lfmap
