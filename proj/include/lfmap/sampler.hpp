#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "lfmap/geometry.hpp"

namespace lfmap {

enum class SampleTag : std::uint8_t { kSurface = 0, kFront = 1, kBehind = 2 };

/// One labeled SDF training sample. Sign convention: positive between the
/// camera and the surface (observed free space), negative behind it.
struct TrainingSample {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double sdf_label = 0.0;  // meters
  SampleTag tag = SampleTag::kSurface;
  int frame_index = 0;
};

struct SamplerConfig {
  int n_front = 2;
  int n_behind = 1;
  int n_surface = 1;
  double l_front_lo = 0.3;
  double l_front_hi = 0.99;
  double l_behind_lo = 1.01;
  double l_b = 0.1;  // behind band: l in (1.01, 1 + l_b)
  double surface_radius = 0.05;  // meters
  int dense_factor = 4;
};

struct RaySampleStats {
  std::size_t skipped_zero_depth = 0;
};

/// Front/behind samples along camera rays: ray(l) = e + l*(p - e),
/// label (1 - l) * ||p - e||. Deterministic given the seed.
std::vector<TrainingSample> sample_rays(const ColorPointCloud& cloud,
                                        const Eigen::Vector3d& camera_origin,
                                        const SamplerConfig& cfg,
                                        std::uint64_t rng_seed, int frame_index,
                                        RaySampleStats* stats = nullptr);

/// Zero-label samples on the disk of radius r around each surface point, in
/// the plane perpendicular to the point-to-camera direction. Uniform by area
/// (concentric map).
std::vector<TrainingSample> sample_surface_plane(
    const ColorPointCloud& cloud, const Eigen::Vector3d& camera_origin,
    const SamplerConfig& cfg, std::uint64_t rng_seed, int frame_index,
    RaySampleStats* stats = nullptr);

using SampleBatch = std::vector<TrainingSample>;

/// Sample pool stratified by observation index. Single writer; batches are
/// value snapshots.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2'000'000)
      : capacity_(capacity) {}

  void add(const std::vector<TrainingSample>& samples);
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  void clear();

  std::vector<int> stored_frames() const;
  const std::vector<TrainingSample>& frame_samples(int frame_index) const;

  /// Thins oldest frames first when over capacity, keeping a floor of
  /// min_keep samples per frame.
  void set_min_keep(std::size_t n) { min_keep_ = n; }

 private:
  friend SampleBatch mix_replay(ReplayBuffer&, const std::vector<TrainingSample>&,
                                double, std::size_t, std::uint64_t);
  void evict_if_needed();

  std::size_t capacity_;
  std::size_t min_keep_ = 64;
  std::size_t size_ = 0;
  std::map<int, std::vector<TrainingSample>> by_frame_;
};

/// Draws batch_size samples: each slot is new with probability new_fraction,
/// otherwise replayed from a uniformly chosen stored frame.
/// Throws std::invalid_argument when both pools are empty.
SampleBatch mix_replay(ReplayBuffer& buffer,
                       const std::vector<TrainingSample>& new_samples,
                       double new_fraction, std::size_t batch_size,
                       std::uint64_t rng_seed);

}  // namespace lfmap
