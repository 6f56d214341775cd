#include <doctest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "curvreg/error.hpp"
#include "curvreg/geometry.hpp"
#include "curvreg/rng.hpp"
#include "test_helpers.hpp"

using namespace curvreg;
using testutil::random_point;
using testutil::random_rotation;
using testutil::random_transform;
using testutil::rotation_about;

TEST_CASE("apply_transform basics") {
  RigidTransform id;
  CHECK(apply_transform(id, Point3(1, 2, 3)).isApprox(Point3(1, 2, 3)));

  RigidTransform flip;  // 180 degrees about z
  flip.rotation = rotation_about(Eigen::Vector3d::UnitZ(), M_PI);
  Point3 p = apply_transform(flip, Point3(1, 0, 0));
  CHECK(p.x() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(p.y()) < 1e-12);

  RigidTransform quarter;  // 90 degrees about z plus lift
  quarter.rotation = rotation_about(Eigen::Vector3d::UnitZ(), M_PI / 2);
  quarter.translation = Point3(0, 0, 1);
  Point3 q = apply_transform(quarter, Point3(1, 0, 0));
  CHECK((q - Point3(0, 1, 1)).norm() < 1e-12);
}

TEST_CASE("apply_transform preserves pairwise distances") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    RigidTransform t = random_transform(rng);
    Point3 a = random_point(rng, -10, 10);
    Point3 b = random_point(rng, -10, 10);
    double before = (a - b).norm();
    double after = (apply_transform(t, a) - apply_transform(t, b)).norm();
    CHECK(std::abs(after - before) <= 1e-12 * std::max(1.0, before));
  }
}

TEST_CASE("compose and inverse") {
  SplitMix64 rng(12);
  RigidTransform x = random_transform(rng);

  RigidTransform left = compose(RigidTransform::identity(), x);
  CHECK(left.rotation.isApprox(x.rotation, 1e-15));
  CHECK(left.translation.isApprox(x.translation, 1e-15));

  RigidTransform round = compose(x, inverse(x));
  CHECK((round.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(round.translation.norm() < 1e-9);

  RigidTransform half;
  half.rotation = rotation_about(Eigen::Vector3d::UnitZ(), M_PI / 4);
  RigidTransform full = compose(half, half);
  CHECK((full.rotation - rotation_about(Eigen::Vector3d::UnitZ(), M_PI / 2))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  // compose applies b then a
  RigidTransform a = random_transform(rng);
  RigidTransform b = random_transform(rng);
  Point3 p = random_point(rng, -5, 5);
  CHECK((apply_transform(compose(a, b), p) - apply_transform(a, apply_transform(b, p)))
            .norm() < 1e-12);
}

TEST_CASE("rotation_angle metric") {
  CHECK(rotation_angle(Eigen::Matrix3d::Identity()) == doctest::Approx(0.0));
  CHECK(rotation_angle(rotation_about(Eigen::Vector3d::UnitX(), 0.3)) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rotation_distance(rotation_about(Eigen::Vector3d::UnitZ(), M_PI / 2),
                          Eigen::Matrix3d::Identity()) ==
        doctest::Approx(M_PI / 2).epsilon(1e-12));
}

static CorrespondenceSet make_pairs(const std::vector<Point3>& data,
                                    const RigidTransform& truth) {
  CorrespondenceSet set;
  for (const auto& d : data) set.pairs.push_back({apply_transform(truth, d), d});
  return set;
}

TEST_CASE("estimate_rigid_svd identity on fixed points") {
  CorrespondenceSet set;
  set.pairs = {{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}, {{0, 1, 0}, {0, 1, 0}}};
  RigidTransform est = estimate_rigid_svd(set);
  CHECK((est.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(est.translation.norm() < 1e-12);
}

TEST_CASE("estimate_rigid_svd recovers a known transform") {
  RigidTransform truth;
  truth.rotation = rotation_about(Eigen::Vector3d::UnitY(), M_PI / 6);
  truth.translation = Point3(1, -2, 0.5);
  std::vector<Point3> data = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  RigidTransform est = estimate_rigid_svd(make_pairs(data, truth));
  CHECK(rotation_distance(est.rotation, truth.rotation) < 1e-9);
  CHECK((est.translation - truth.translation).norm() < 1e-9);
}

TEST_CASE("estimate_rigid_svd exact on random transforms") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    RigidTransform truth = random_transform(rng);
    int n = 3 + static_cast<int>(rng.bounded(48));
    std::vector<Point3> data;
    for (int i = 0; i < n; ++i) data.push_back(random_point(rng, -10, 10));
    RigidTransform est = estimate_rigid_svd(make_pairs(data, truth));
    CHECK(rotation_distance(est.rotation, truth.rotation) < 1e-9);
    CHECK((est.translation - truth.translation).norm() < 1e-9);
    CHECK(est.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("estimate_rigid_svd invariant to pair permutation") {
  SplitMix64 rng(22);
  RigidTransform truth = random_transform(rng);
  std::vector<Point3> data;
  for (int i = 0; i < 20; ++i) data.push_back(random_point(rng, -10, 10));
  CorrespondenceSet set = make_pairs(data, truth);

  CorrespondenceSet shuffled = set;
  for (size_t i = shuffled.pairs.size(); i > 1; --i) {
    std::swap(shuffled.pairs[i - 1], shuffled.pairs[rng.bounded(i)]);
  }

  RigidTransform a = estimate_rigid_svd(set);
  RigidTransform b = estimate_rigid_svd(shuffled);
  CHECK(rotation_distance(a.rotation, b.rotation) < 1e-10);
  CHECK((a.translation - b.translation).norm() < 1e-10);
}

TEST_CASE("estimate_rigid_svd noise tolerance (Monte-Carlo)") {
  // 100 points with sigma = 0.01 noise: rotation error stays below 0.005 rad
  // in every one of 100 seeded trials.
  for (uint64_t seed = 0; seed < 100; ++seed) {
    SplitMix64 rng(1000 + seed);
    RigidTransform truth = random_transform(rng);
    CorrespondenceSet set;
    for (int i = 0; i < 100; ++i) {
      Point3 d = random_point(rng, -10, 10);
      Point3 m = apply_transform(truth, d);
      m += 0.01 * Point3(rng.normal(), rng.normal(), rng.normal());
      set.pairs.push_back({m, d});
    }
    RigidTransform est = estimate_rigid_svd(set);
    CHECK(rotation_distance(est.rotation, truth.rotation) < 0.005);
  }
}

TEST_CASE("estimate_rigid_svd reflection branch yields det +1") {
  // Coplanar points whose best alignment would be a reflection without the
  // Umeyama correction.
  CorrespondenceSet mirrored;
  std::vector<Point3> pts = {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {0.5, 0.5, 0}};
  for (const auto& p : pts) mirrored.pairs.push_back({Point3(p.x(), p.y(), -p.z()), p});
  RigidTransform est = estimate_rigid_svd(mirrored);
  CHECK(est.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(is_rotation(est.rotation));

  // Mirror with out-of-plane content as well.
  CorrespondenceSet hard;
  std::vector<Point3> pts2 = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  for (const auto& p : pts2) hard.pairs.push_back({Point3(-p.x(), p.y(), p.z()), p});
  RigidTransform est2 = estimate_rigid_svd(hard);
  CHECK(est2.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));

  SplitMix64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    // Random coplanar sets exercise the rank-2 path.
    RigidTransform truth = random_transform(rng);
    CorrespondenceSet set;
    for (int i = 0; i < 3; ++i) {
      Point3 d(rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0);
      set.pairs.push_back({apply_transform(truth, d), d});
    }
    RigidTransform est3 = estimate_rigid_svd(set);
    CHECK(est3.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("estimate_rigid_svd degenerate inputs") {
  CorrespondenceSet two;
  two.pairs = {{{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
  CHECK_THROWS_AS(estimate_rigid_svd(two), Error);

  CorrespondenceSet collinear;
  for (int i = 0; i < 5; ++i) {
    Point3 p(static_cast<double>(i), 0, 0);
    collinear.pairs.push_back({p, p});
  }
  try {
    estimate_rigid_svd(collinear);
    FAIL("expected DegenerateCorrespondences");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCorrespondences);
  }
}
