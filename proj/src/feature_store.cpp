#include "lfmap/feature_store.hpp"

#include <algorithm>
#include <cmath>

#include "lfmap/rng.hpp"

namespace lfmap {

void FeatureStore::insert(const MapPoint& mp) {
  points_[key_of(mp.position)] = mp;
}

bool FeatureStore::insert_if_absent(const MapPoint& mp) {
  return points_.emplace(key_of(mp.position), mp).second;
}

std::vector<Neighbor> FeatureStore::nearest(const Eigen::Vector3d& q) const {
  std::vector<Neighbor> hits;
  const VoxelKey c = key_of(q);
  for (std::int32_t dx = -1; dx <= 1; ++dx) {
    for (std::int32_t dy = -1; dy <= 1; ++dy) {
      for (std::int32_t dz = -1; dz <= 1; ++dz) {
        const VoxelKey key{c.x + dx, c.y + dy, c.z + dz};
        auto it = points_.find(key);
        if (it == points_.end()) continue;
        hits.push_back({key, (it->second.position - q).norm()});
      }
    }
  }
  std::sort(hits.begin(), hits.end(),
            [](const Neighbor& a, const Neighbor& b) {
              return a.distance < b.distance;
            });
  if (hits.size() > static_cast<std::size_t>(k_)) hits.resize(k_);
  return hits;
}

std::optional<double> FeatureStore::nearest_distance(
    const Eigen::Vector3d& q) const {
  const auto hits = nearest(q);
  if (hits.empty()) return std::nullopt;
  return hits.front().distance;
}

std::vector<MapPoint> FeatureStore::all_points() const {
  std::vector<MapPoint> out;
  out.reserve(points_.size());
  for (const auto& [key, mp] : points_) out.push_back(mp);
  return out;
}

void insert_keypoints(const ColorPointCloud& cloud, FeatureStore& store,
                      double init_scale, std::uint64_t seed) {
  const int m = store.feature_dim();
  for (const auto& p : cloud.points) {
    const VoxelKey key = store.key_of(p);
    if (store.contains(key)) continue;
    MapPoint mp;
    mp.position = p;
    mp.feature.resize(m);
    const std::uint64_t voxel_hash =
        VoxelKeyHash{}(key) * 0x2545f4914f6cdd1dULL;
    Rng rng(mix_seed(seed, voxel_hash));
    for (int i = 0; i < m; ++i) mp.feature[i] = rng.normal(0.0, init_scale);
    store.insert_if_absent(mp);
  }
}

std::vector<MapPoint> farthest_point_sample(const FeatureStore& store,
                                            std::size_t count) {
  std::vector<MapPoint> pts = store.all_points();
  if (pts.size() <= count) return pts;

  // Stable scan order so the subsample is reproducible.
  std::sort(pts.begin(), pts.end(), [](const MapPoint& a, const MapPoint& b) {
    if (a.position.x() != b.position.x()) return a.position.x() < b.position.x();
    if (a.position.y() != b.position.y()) return a.position.y() < b.position.y();
    return a.position.z() < b.position.z();
  });

  std::vector<MapPoint> picked;
  picked.reserve(count);
  std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  while (picked.size() < count) {
    picked.push_back(pts[next]);
    const Eigen::Vector3d& np = pts[next].position;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      dist[i] = std::min(dist[i], (pts[i].position - np).norm());
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
  }
  return picked;
}

}  // namespace lfmap
