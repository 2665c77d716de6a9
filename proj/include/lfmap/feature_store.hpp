#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "lfmap/geometry.hpp"

namespace lfmap {

/// Semantic labels carried by map points.
enum Semantic : int { kUnknown = 0, kTraversable = 1, kObstacle = 2 };

/// Explicit map point: position, learned feature, semantic label.
struct MapPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::VectorXd feature;
  int semantic = kUnknown;
};

struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    return 73856093ULL * static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) ^
           19349669ULL * static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) ^
           83492791ULL * static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z));
  }
};

/// Neighbor hit from a k-NN query, sorted by distance.
struct Neighbor {
  VoxelKey key;
  double distance = 0.0;
};

/// Sparse voxel-hash index over map points, one point per voxel.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(double voxel_size, int feature_dim, int neighbor_count)
      : voxel_size_(voxel_size), feature_dim_(feature_dim), k_(neighbor_count) {}

  double voxel_size() const { return voxel_size_; }
  int feature_dim() const { return feature_dim_; }
  int neighbor_count() const { return k_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  VoxelKey key_of(const Eigen::Vector3d& p) const {
    return VoxelKey{static_cast<std::int32_t>(std::floor(p.x() / voxel_size_)),
                    static_cast<std::int32_t>(std::floor(p.y() / voxel_size_)),
                    static_cast<std::int32_t>(std::floor(p.z() / voxel_size_))};
  }

  /// Newest wins on voxel collision.
  void insert(const MapPoint& mp);
  /// Keeps an existing occupant (and its trained feature) untouched.
  bool insert_if_absent(const MapPoint& mp);

  bool contains(const VoxelKey& key) const { return points_.count(key) > 0; }
  MapPoint& at(const VoxelKey& key) { return points_.at(key); }
  const MapPoint& at(const VoxelKey& key) const { return points_.at(key); }

  /// Up to k nearest stored points within the 3x3x3 voxel shell around q,
  /// sorted by distance. Empty when nothing is in range.
  std::vector<Neighbor> nearest(const Eigen::Vector3d& q) const;

  /// Distance to the nearest stored point within the shell, if any.
  std::optional<double> nearest_distance(const Eigen::Vector3d& q) const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, mp] : points_) fn(key, mp);
  }
  template <typename Fn>
  void for_each_mutable(Fn&& fn) {
    for (auto& [key, mp] : points_) fn(key, mp);
  }

  std::vector<MapPoint> all_points() const;

 private:
  double voxel_size_ = 0.1;
  int feature_dim_ = 8;
  int k_ = 6;
  std::unordered_map<VoxelKey, MapPoint, VoxelKeyHash> points_;
};

/// One representative point per occupied voxel; fresh voxels get features
/// drawn N(0, init_scale^2) seeded by a hash of the voxel key and seed, so
/// identical geometry yields identical initial features in any visit order.
/// Existing occupants keep their trained features.
void insert_keypoints(const ColorPointCloud& cloud, FeatureStore& store,
                      double init_scale, std::uint64_t seed);

/// Greedy farthest-point subsample of the store, for similarity checks.
std::vector<MapPoint> farthest_point_sample(const FeatureStore& store,
                                            std::size_t count);

}  // namespace lfmap
