#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lfmap/geometry.hpp"
#include "lfmap/rng.hpp"

using namespace lfmap;

namespace {

RGBDFrame constant_depth_frame(int w, int h, double depth) {
  RGBDFrame f;
  f.width = w;
  f.height = h;
  f.color.assign(static_cast<std::size_t>(w) * h, Eigen::Vector3d(0.5, 0.5, 0.5));
  f.depth.assign(static_cast<std::size_t>(w) * h, depth);
  return f;
}

Twist random_twist(Rng& rng, double max_angle) {
  Twist xi;
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  xi.rotational = axis * rng.uniform(0.0, max_angle);
  xi.translational =
      Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  return xi;
}

}  // namespace

TEST_CASE("backproject principal point lands on the optical axis") {
  CameraIntrinsics intr{525.0, 525.0, 32.0, 24.0, 64, 48, 1.0};
  RGBDFrame f = constant_depth_frame(64, 48, 0.0);
  f.depth[24 * 64 + 32] = 2.0;
  const ColorPointCloud cloud = backproject(f, intr);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cloud.points[0].y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cloud.points[0].z() == doctest::Approx(2.0));
}

TEST_CASE("backproject drops zero-depth pixels") {
  CameraIntrinsics intr{525.0, 525.0, 32.0, 24.0, 64, 48, 1.0};
  const RGBDFrame f = constant_depth_frame(64, 48, 0.0);
  CHECK(backproject(f, intr).empty());
}

TEST_CASE("backproject matches the pinhole formula at a frozen pixel") {
  CameraIntrinsics intr{525.0, 525.0, 319.5, 239.5, 640, 480, 1.0};
  RGBDFrame f = constant_depth_frame(640, 480, 0.0);
  f.depth[300 * 640 + 420] = 1.5;
  const ColorPointCloud cloud = backproject(f, intr);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].x() == doctest::Approx(0.28714286).epsilon(1e-5));
  CHECK(cloud.points[0].y() == doctest::Approx(0.17285714).epsilon(1e-5));
  CHECK(cloud.points[0].z() == doctest::Approx(1.5));
}

TEST_CASE("backproject rejects mismatched image dimensions") {
  CameraIntrinsics intr{525.0, 525.0, 32.0, 24.0, 64, 48, 1.0};
  RGBDFrame f = constant_depth_frame(64, 48, 1.0);
  f.depth.pop_back();
  CHECK_THROWS_AS(backproject(f, intr), std::invalid_argument);
}

TEST_CASE("backproject then reproject recovers pixel coordinates") {
  CameraIntrinsics intr{520.9, 521.0, 325.1, 249.7, 640, 480, 1.0};
  RGBDFrame f = constant_depth_frame(640, 480, 0.0);
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const int u = rng.uniform_int(640);
    const int v = rng.uniform_int(480);
    f.depth[static_cast<std::size_t>(v) * 640 + u] = rng.uniform(0.4, 6.0);
  }
  const ColorPointCloud cloud = backproject(f, intr);
  CHECK(cloud.size() > 0);
  for (const auto& p : cloud.points) {
    const double u = p.x() / p.z() * intr.focal_x + intr.center_x;
    const double v = p.y() / p.z() * intr.focal_y + intr.center_y;
    CHECK(std::abs(u - std::round(u)) < 1e-6);
    CHECK(std::abs(v - std::round(v)) < 1e-6);
  }
}

TEST_CASE("exp_map of the zero twist is the identity") {
  const Pose p = exp_map(Twist{});
  CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() == doctest::Approx(0.0));
  CHECK(p.translation.norm() == doctest::Approx(0.0));
}

TEST_CASE("exp_map of a quarter turn about z") {
  Twist xi;
  xi.rotational = Eigen::Vector3d(0, 0, M_PI / 2);
  const Pose p = exp_map(xi);
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((p.rotation - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(p.translation.norm() == doctest::Approx(0.0));
}

TEST_CASE("exp/log roundtrip over 1000 random twists") {
  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = random_twist(rng, 3.0);
    const Twist back = log_map(exp_map(xi));
    worst = std::max(worst,
                     (back.vector() - xi.vector()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("exp/log roundtrip close to the small-angle switchover") {
  Rng rng(43);
  for (double angle : {1e-12, 5e-9, 2e-8, 1e-6, 1e-3}) {
    Twist xi = random_twist(rng, 1.0);
    xi.rotational = xi.rotational.normalized() * angle;
    const Twist back = log_map(exp_map(xi));
    CHECK((back.vector() - xi.vector()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("log_map rejects a half-turn rotation") {
  Twist xi;
  xi.rotational = Eigen::Vector3d(M_PI, 0, 0);
  const Pose p = exp_map(xi);
  CHECK_THROWS_AS(log_map(p), std::domain_error);
}

TEST_CASE("compose and inverse satisfy the group laws") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose a = exp_map(random_twist(rng, 2.5));
    const Pose b = exp_map(random_twist(rng, 2.5));
    const Pose c = exp_map(random_twist(rng, 2.5));

    const Pose id = compose(a, inverse(a));
    CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(id.translation.cwiseAbs().maxCoeff() < 1e-9);

    const Pose ab_c = compose(compose(a, b), c);
    const Pose a_bc = compose(a, compose(b, c));
    CHECK((ab_c.rotation - a_bc.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((ab_c.translation - a_bc.translation).cwiseAbs().maxCoeff() < 1e-9);
  }
  const Pose b = exp_map(random_twist(rng, 2.5));
  const Pose ib = compose(Pose::identity(), b);
  CHECK((ib.rotation - b.rotation).cwiseAbs().maxCoeff() == 0.0);
  CHECK(inverse(Pose::identity()).translation.norm() == 0.0);
}

TEST_CASE("orthonormality survives ten thousand chained compositions") {
  Rng rng(5);
  Pose acc = Pose::identity();
  const Pose step = exp_map(random_twist(rng, 0.7));
  for (int i = 0; i < 10000; ++i) acc = compose(acc, step);
  CHECK(acc.orthonormality_drift() < 1e-9);
}

TEST_CASE("transform_cloud matches pose semantics") {
  ColorPointCloud cloud;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    cloud.push(Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1)),
               Eigen::Vector3d(0.2, 0.4, 0.6));
  }

  const ColorPointCloud same = transform_cloud(Pose::identity(), cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((same.points[i] - cloud.points[i]).norm() == 0.0);
  }

  Pose shift;
  shift.translation = Eigen::Vector3d(1, 0, 0);
  const ColorPointCloud shifted = transform_cloud(shift, cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(shifted.points[i].x() == doctest::Approx(cloud.points[i].x() + 1.0));
  }

  const Pose a = exp_map(random_twist(rng, 2.0));
  const Pose b = exp_map(random_twist(rng, 2.0));
  const ColorPointCloud lhs = transform_cloud(compose(a, b), cloud);
  const ColorPointCloud rhs = transform_cloud(a, transform_cloud(b, cloud));
  double worst = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    worst = std::max(worst, (lhs.points[i] - rhs.points[i]).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("seeded rng streams are reproducible and in range") {
  Rng a(123), b(123), c(124);
  bool all_equal = true;
  bool any_differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double ua = a.uniform();
    const double ub = b.uniform();
    all_equal = all_equal && (ua == ub);
    any_differs = any_differs || (ua != c.uniform());
    CHECK(ua >= 0.0);
    CHECK(ua < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("normal samples have near-standard moments") {
  Rng rng(99);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rotation_angle_between recovers the relative angle") {
  Twist xi;
  xi.rotational = Eigen::Vector3d(0, 0.3, 0);
  CHECK(rotation_angle_between(Pose::identity(), exp_map(xi)) ==
        doctest::Approx(0.3).epsilon(1e-9));
}
