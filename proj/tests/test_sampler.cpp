#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lfmap/feature_store.hpp"
#include "lfmap/rng.hpp"
#include "lfmap/sampler.hpp"

using namespace lfmap;

namespace {

ColorPointCloud random_cloud(int n, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
  ColorPointCloud cloud;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    cloud.push(Eigen::Vector3d(rng.uniform(lo, hi), rng.uniform(lo, hi),
                               rng.uniform(lo, hi)),
               Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform()));
  }
  return cloud;
}

bool identical(const TrainingSample& a, const TrainingSample& b) {
  return a.position == b.position && a.color == b.color &&
         a.sdf_label == b.sdf_label && a.tag == b.tag &&
         a.frame_index == b.frame_index;
}

}  // namespace

TEST_CASE("ray samples respect the front/behind bands and label formula") {
  const Eigen::Vector3d eye(0.3, -0.2, 0.1);
  const ColorPointCloud cloud = random_cloud(200, 17, 1.0, 3.0);
  SamplerConfig cfg;
  const auto samples = sample_rays(cloud, eye, cfg, 99, 7);
  REQUIRE(samples.size() ==
          cloud.size() * static_cast<std::size_t>(cfg.n_front + cfg.n_behind));

  std::size_t cursor = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = (cloud.points[i] - eye).norm();
    for (int k = 0; k < cfg.n_front + cfg.n_behind; ++k, ++cursor) {
      const auto& s = samples[cursor];
      const double dist = (s.position - eye).norm();
      const double l = dist / d;
      CHECK(s.frame_index == 7);
      CHECK(s.color == cloud.colors[i]);
      // Label translates straight from the ray parameter.
      CHECK(s.sdf_label == doctest::Approx((1.0 - l) * d).epsilon(1e-9));
      if (s.tag == SampleTag::kFront) {
        CHECK(dist > 0.0);
        CHECK(dist < d);
        CHECK(l > cfg.l_front_lo);
        CHECK(l < cfg.l_front_hi);
        CHECK(s.sdf_label > 0.0);
      } else {
        REQUIRE(s.tag == SampleTag::kBehind);
        CHECK(dist > d);
        CHECK(dist <= (1.0 + cfg.l_b) * d);
        CHECK(s.sdf_label < 0.0);
      }
    }
  }
}

TEST_CASE("ray sampling skips zero-depth points and counts them") {
  const Eigen::Vector3d eye = Eigen::Vector3d::Zero();
  ColorPointCloud cloud;
  cloud.push(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());  // on the eye
  cloud.push(Eigen::Vector3d(0, 0, 2), Eigen::Vector3d::Zero());
  SamplerConfig cfg;
  RaySampleStats stats;
  const auto samples = sample_rays(cloud, eye, cfg, 1, 0, &stats);
  CHECK(stats.skipped_zero_depth == 1);
  CHECK(samples.size() == static_cast<std::size_t>(cfg.n_front + cfg.n_behind));
}

TEST_CASE("surface-plane samples stay on the tangent disk") {
  const Eigen::Vector3d eye(0, 0, 0);
  const ColorPointCloud cloud = random_cloud(100, 23, 0.5, 2.5);
  SamplerConfig cfg;
  cfg.n_surface = 3;
  const auto samples = sample_surface_plane(cloud, eye, cfg, 5, 0);
  REQUIRE(samples.size() == cloud.size() * 3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Eigen::Vector3d& p = cloud.points[i / 3];
    const Eigen::Vector3d n = (eye - p).normalized();
    CHECK(s.tag == SampleTag::kSurface);
    CHECK(s.sdf_label == 0.0);
    CHECK(std::abs((s.position - p).dot(n)) < 1e-9);
    CHECK((s.position - p).norm() <= cfg.surface_radius + 1e-12);
  }
}

TEST_CASE("disk samples are centered on the surface point") {
  const Eigen::Vector3d eye(0, 0, 0);
  ColorPointCloud cloud;
  cloud.push(Eigen::Vector3d(0.3, -0.4, 1.8), Eigen::Vector3d(1, 1, 1));
  SamplerConfig cfg;
  cfg.n_surface = 10000;
  cfg.surface_radius = 0.05;
  const auto samples = sample_surface_plane(cloud, eye, cfg, 77, 0);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& s : samples) mean += s.position;
  mean /= static_cast<double>(samples.size());
  // Monte-Carlo symmetry: the sample mean concentrates on the center.
  CHECK((mean - cloud.points[0]).norm() < 3.0 * cfg.surface_radius / 100.0);
}

TEST_CASE("zero surface radius collapses every sample onto the point") {
  const ColorPointCloud cloud = random_cloud(20, 2, 0.5, 2.0);
  SamplerConfig cfg;
  cfg.surface_radius = 0.0;
  const auto samples =
      sample_surface_plane(cloud, Eigen::Vector3d::Zero(), cfg, 3, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK((samples[i].position - cloud.points[i]).norm() == 0.0);
  }
}

TEST_CASE("sampling is byte-identical for identical seeds") {
  const ColorPointCloud cloud = random_cloud(100, 4, 1.0, 2.0);
  SamplerConfig cfg;
  const auto a = sample_rays(cloud, Eigen::Vector3d::Zero(), cfg, 31, 1);
  const auto b = sample_rays(cloud, Eigen::Vector3d::Zero(), cfg, 31, 1);
  const auto c = sample_rays(cloud, Eigen::Vector3d::Zero(), cfg, 32, 1);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && identical(a[i], b[i]);
  CHECK(same);
  bool differs = false;
  for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i) {
    differs = differs || !identical(a[i], c[i]);
  }
  CHECK(differs);
}

TEST_CASE("replay mix falls back to the only non-empty pool") {
  ReplayBuffer buffer;
  std::vector<TrainingSample> fresh(10);
  for (int i = 0; i < 10; ++i) fresh[static_cast<std::size_t>(i)].frame_index = 100;

  const auto all_new = mix_replay(buffer, fresh, 0.25, 64, 9);
  REQUIRE(all_new.size() == 64);
  for (const auto& s : all_new) CHECK(s.frame_index == 100);

  std::vector<TrainingSample> stored(10);
  for (auto& s : stored) s.frame_index = 3;
  buffer.add(stored);
  const auto no_replay = mix_replay(buffer, fresh, 1.0, 64, 9);
  for (const auto& s : no_replay) CHECK(s.frame_index == 100);

  const auto from_buffer = mix_replay(buffer, {}, 0.5, 64, 9);
  for (const auto& s : from_buffer) CHECK(s.frame_index == 3);

  ReplayBuffer empty_buffer;
  CHECK_THROWS_AS(mix_replay(empty_buffer, {}, 0.5, 64, 9),
                  std::invalid_argument);
}

TEST_CASE("replay mix is stratified across stored frames") {
  ReplayBuffer buffer;
  for (int frame = 0; frame < 4; ++frame) {
    std::vector<TrainingSample> s(50);
    for (auto& x : s) x.frame_index = frame;
    buffer.add(s);
  }
  std::vector<TrainingSample> fresh(50);
  for (auto& x : fresh) x.frame_index = 100;

  const int draws = 100;
  const std::size_t batch = 256;
  std::array<long, 4> counts{0, 0, 0, 0};
  long new_count = 0;
  for (int d = 0; d < draws; ++d) {
    const auto b = mix_replay(buffer, fresh, 0.5, batch, 1000 + d);
    for (const auto& s : b) {
      if (s.frame_index == 100) {
        ++new_count;
      } else {
        ++counts[static_cast<std::size_t>(s.frame_index)];
      }
    }
  }
  const double slots = static_cast<double>(draws) * batch;
  // Each slot replays a given frame with p = 0.5 / 4.
  const double p = 0.125;
  const double expect = slots * p;
  const double sigma = std::sqrt(slots * p * (1 - p));
  for (long c : counts) {
    CHECK(std::abs(static_cast<double>(c) - expect) < 3.0 * sigma);
  }
  const double pn = 0.5;
  CHECK(std::abs(static_cast<double>(new_count) - slots * pn) <
        3.0 * std::sqrt(slots * pn * (1 - pn)));
}

TEST_CASE("replay buffer thins oldest frames first under pressure") {
  ReplayBuffer buffer(1000);
  buffer.set_min_keep(10);
  for (int frame = 0; frame < 8; ++frame) {
    std::vector<TrainingSample> s(200);
    for (auto& x : s) x.frame_index = frame;
    buffer.add(s);
  }
  CHECK(buffer.size() <= 1000);
  const auto frames = buffer.stored_frames();
  REQUIRE(frames.size() == 8);  // thinned, never fully evicted
  CHECK(buffer.frame_samples(0).size() <= buffer.frame_samples(7).size());
  CHECK(buffer.frame_samples(0).size() >= 10);
}

TEST_CASE("feature store keeps one point per voxel, newest wins") {
  FeatureStore store(0.1, 4, 6);
  MapPoint a;
  a.position = Eigen::Vector3d(0.51, 0.52, 0.53);
  a.feature = Eigen::VectorXd::Constant(4, 1.0);
  MapPoint b = a;
  b.position = Eigen::Vector3d(0.54, 0.55, 0.56);  // same voxel
  b.feature = Eigen::VectorXd::Constant(4, 2.0);
  store.insert(a);
  store.insert(b);
  CHECK(store.size() == 1);
  CHECK(store.at(store.key_of(a.position)).feature(0) == 2.0);

  MapPoint c = a;
  c.feature = Eigen::VectorXd::Constant(4, 3.0);
  CHECK_FALSE(store.insert_if_absent(c));
  CHECK(store.at(store.key_of(a.position)).feature(0) == 2.0);
}

TEST_CASE("nearest returns sorted neighbors from the surrounding shell") {
  FeatureStore store(0.1, 2, 6);
  for (int i = 0; i < 10; ++i) {
    MapPoint mp;
    mp.position = Eigen::Vector3d(0.05 + 0.1 * i, 0.05, 0.05);
    mp.feature = Eigen::VectorXd::Zero(2);
    store.insert(mp);
  }
  const Eigen::Vector3d q(0.26, 0.05, 0.05);
  const auto hits = store.nearest(q);
  REQUIRE(!hits.empty());
  CHECK(hits.size() <= 6);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    CHECK(hits[i - 1].distance <= hits[i].distance);
  }
  CHECK(store.at(hits[0].key).position.x() == doctest::Approx(0.25));
  const auto nd = store.nearest_distance(q);
  REQUIRE(nd.has_value());
  CHECK(*nd == doctest::Approx(0.01));
  CHECK_FALSE(store.nearest_distance(Eigen::Vector3d(10, 10, 10)).has_value());
}

TEST_CASE("keypoint insertion dedups per voxel and matches the count oracle") {
  FeatureStore store(0.1, 8, 6);
  insert_keypoints(ColorPointCloud{}, store, 0.01, 1);
  CHECK(store.empty());

  ColorPointCloud two;
  two.push(Eigen::Vector3d(0.01, 0.01, 0.01), Eigen::Vector3d::Zero());
  two.push(Eigen::Vector3d(0.02, 0.02, 0.02), Eigen::Vector3d::Zero());
  insert_keypoints(two, store, 0.01, 1);
  CHECK(store.size() == 1);

  FeatureStore cube_store(0.1, 8, 6);
  const ColorPointCloud cube = random_cloud(20000, 55, 0.0, 1.0);
  insert_keypoints(cube, cube_store, 0.01, 1);
  CHECK(cube_store.size() >= 900);
  CHECK(cube_store.size() <= 1100);
}

TEST_CASE("keypoint features depend on the voxel, not the visit order") {
  ColorPointCloud cloud = random_cloud(500, 8, 0.0, 1.0);
  FeatureStore fwd(0.1, 8, 6);
  insert_keypoints(cloud, fwd, 0.01, 42);

  std::reverse(cloud.points.begin(), cloud.points.end());
  std::reverse(cloud.colors.begin(), cloud.colors.end());
  FeatureStore rev(0.1, 8, 6);
  insert_keypoints(cloud, rev, 0.01, 42);

  REQUIRE(fwd.size() == rev.size());
  bool all_equal = true;
  fwd.for_each([&](const VoxelKey& key, const MapPoint& mp) {
    all_equal = all_equal && rev.contains(key) &&
                rev.at(key).feature == mp.feature;
  });
  CHECK(all_equal);
}

TEST_CASE("farthest point sampling is deterministic and spans the store") {
  FeatureStore store(0.1, 2, 6);
  const ColorPointCloud cloud = random_cloud(2000, 31, -1.0, 1.0);
  insert_keypoints(cloud, store, 0.01, 3);

  const auto a = farthest_point_sample(store, 32);
  const auto b = farthest_point_sample(store, 32);
  REQUIRE(a.size() == 32);
  REQUIRE(b.size() == 32);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].position == b[i].position);
  }

  double sample_diam = 0.0;
  for (const auto& p : a) {
    for (const auto& q : a) {
      sample_diam = std::max(sample_diam, (p.position - q.position).norm());
    }
  }
  double store_diam = 0.0;
  const auto all = store.all_points();
  for (std::size_t i = 0; i < all.size(); i += 37) {
    for (std::size_t j = 0; j < all.size(); j += 37) {
      store_diam = std::max(store_diam, (all[i].position - all[j].position).norm());
    }
  }
  CHECK(sample_diam > 0.8 * store_diam);
}
