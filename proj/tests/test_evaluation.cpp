#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "curvreg/error.hpp"
#include "curvreg/evaluation.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace curvreg;

TEST_CASE("pair_error on hand-constructed transforms") {
  RigidTransform a = RigidTransform::identity();

  SUBCASE("identical transforms have zero error") {
    const ErrorSample e = pair_error(a, a);
    CHECK(e.translation_error == 0.0);
    CHECK(e.rotation_error == 0.0);
  }
  SUBCASE("3-4-5 translation offset") {
    RigidTransform b = a;
    b.translation = Point3(3.0, 4.0, 0.0);
    const ErrorSample e = pair_error(a, b);
    CHECK(e.translation_error == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(e.rotation_error == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("quarter-turn rotation offset") {
    RigidTransform b = a;
    b.rotation = testutil::rotation_about(Eigen::Vector3d::UnitZ(), M_PI / 2.0);
    const ErrorSample e = pair_error(a, b);
    CHECK(e.rotation_error == doctest::Approx(M_PI / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("rmse matches hand-computed values") {
  SUBCASE("single sample is its own RMSE") {
    const RmseSummary s = rmse({{"p", 2.0, 0.1}});
    CHECK(s.translation == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.rotation == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("two samples: sqrt of mean square") {
    const RmseSummary s = rmse({{"a", 3.0, 0.0}, {"b", 4.0, 0.0}});
    CHECK(s.translation == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK(s.rotation == 0.0);
  }
  SUBCASE("empty sample set is rejected") { CHECK_THROWS_AS(rmse({}), Error); }
}

TEST_CASE("ecdf steps through sorted distinct values ending at one") {
  SUBCASE("distinct samples") {
    const auto steps = ecdf({3.0, 1.0, 2.0});
    REQUIRE(steps.size() == 3);
    CHECK(steps[0].first == 1.0);
    CHECK(steps[0].second == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(steps[1].first == 2.0);
    CHECK(steps[1].second == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(steps[2].first == 3.0);
    CHECK(steps[2].second == 1.0);
  }
  SUBCASE("duplicates collapse into one step") {
    const auto steps = ecdf({5.0, 5.0, 5.0});
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].first == 5.0);
    CHECK(steps[0].second == 1.0);
  }
  SUBCASE("monotone and terminal for random input") {
    SplitMix64 rng(4);
    std::vector<double> samples;
    for (int i = 0; i < 200; ++i) samples.push_back(rng.uniform(0.0, 2.0));
    const auto steps = ecdf(samples);
    for (size_t i = 1; i < steps.size(); ++i) {
      CHECK(steps[i - 1].first < steps[i].first);
      CHECK(steps[i - 1].second < steps[i].second);
    }
    CHECK(steps.back().second == 1.0);
  }
  SUBCASE("empty input is rejected") { CHECK_THROWS_AS(ecdf({}), Error); }
}

TEST_CASE("failure rate counts samples strictly above the threshold") {
  const std::vector<double> rot = {0.05, 0.1, 0.2, 0.3};
  CHECK(failure_rate(rot, 0.1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(failure_rate(rot, 0.0) == 1.0);
  CHECK(failure_rate(rot, 1.0) == 0.0);
}

TEST_CASE("trajectory integration composes pairwise transforms") {
  SUBCASE("identities stay identity") {
    const std::vector<RigidTransform> poses =
        integrate_trajectory({RigidTransform::identity(), RigidTransform::identity()});
    REQUIRE(poses.size() == 3);
    for (const RigidTransform& p : poses) {
      CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
      CHECK(p.translation.norm() < 1e-12);
    }
  }
  SUBCASE("unit x steps accumulate") {
    RigidTransform step = RigidTransform::identity();
    step.translation = Point3(1.0, 0.0, 0.0);
    const std::vector<RigidTransform> poses =
        integrate_trajectory(std::vector<RigidTransform>(7, step));
    REQUIRE(poses.size() == 8);
    CHECK((poses.back().translation - Point3(7.0, 0.0, 0.0)).norm() < 1e-12);
  }
  SUBCASE("random walk matches the direct matrix product") {
    SplitMix64 rng(5);
    std::vector<RigidTransform> steps;
    for (int i = 0; i < 25; ++i) steps.push_back(testutil::random_transform(rng, 1.0));
    const std::vector<RigidTransform> poses = integrate_trajectory(steps);

    RigidTransform direct = RigidTransform::identity();
    for (size_t i = 0; i < steps.size(); ++i) {
      direct = compose(direct, steps[i]);
      CHECK(rotation_distance(poses[i + 1].rotation, direct.rotation) < 1e-9);
      CHECK((poses[i + 1].translation - direct.translation).norm() < 1e-9);
    }
  }
  SUBCASE("every integrated pose is orthonormal") {
    SplitMix64 rng(6);
    std::vector<RigidTransform> steps;
    for (int i = 0; i < 400; ++i) steps.push_back(testutil::random_transform(rng, 1.0));
    for (const RigidTransform& p : integrate_trajectory(steps))
      CHECK(is_rotation(p.rotation));
  }
}

TEST_CASE("map accumulation merges scans with voxel decimation") {
  PointCloud scan;
  scan.points = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)};

  SUBCASE("one scan at identity is returned as-is") {
    const PointCloud map =
        accumulate_map({scan}, {RigidTransform::identity()}, 0.0);
    REQUIRE(map.size() == scan.size());
    for (size_t i = 0; i < map.size(); ++i) CHECK(map.points[i] == scan.points[i]);
  }
  SUBCASE("duplicate scans dedup to at most one scan's points") {
    const PointCloud map = accumulate_map(
        {scan, scan}, {RigidTransform::identity(), RigidTransform::identity()}, 0.1);
    CHECK(map.size() <= scan.size());
  }
  SUBCASE("decimation off keeps every point") {
    const PointCloud map = accumulate_map(
        {scan, scan}, {RigidTransform::identity(), RigidTransform::identity()}, 0.0);
    CHECK(map.size() == 2 * scan.size());
  }
  SUBCASE("poses move the scans") {
    RigidTransform shift = RigidTransform::identity();
    shift.translation = Point3(10.0, 0.0, 0.0);
    const PointCloud map =
        accumulate_map({scan, scan}, {RigidTransform::identity(), shift}, 0.1);
    CHECK(map.size() == 2 * scan.size());
  }
  SUBCASE("scan/pose count mismatch is rejected") {
    CHECK_THROWS_AS(accumulate_map({scan}, {}, 0.1), Error);
  }
}

TEST_CASE("flat terrain rays hit the analytic plane") {
  TerrainSpec spec;
  spec.noise_amplitude = 0.0;  // perfectly flat at z = 0
  spec.range_noise_sigma = 0.0;
  const Terrain terrain(spec);
  CHECK(terrain.height(3.3, -7.1) == 0.0);

  RigidTransform pose = RigidTransform::identity();
  pose.translation = Point3(0.0, 0.0, 2.0);

  ProjectionModel model;
  model.az_res = ProjectionModel::kPi / 18.0;
  model.el_res = ProjectionModel::kPi / 18.0;
  model.el_start = -ProjectionModel::kPi / 2.0;
  model.el_end = -ProjectionModel::kPi / 18.0;  // downward band only

  const PointCloud scan = synth_scan(terrain, pose, model);
  CHECK(!scan.points.empty());
  for (const Point3& p : scan.points) {
    // Sensor-frame point: the ray direction is p/|p|, analytic range to the
    // z=0 plane from height 2 is 2/|dz| with dz the downward component.
    const double r = p.norm();
    const Point3 dir = p / r;
    REQUIRE(dir.z() < 0.0);
    const double analytic = 2.0 / -dir.z();
    CHECK(r == doctest::Approx(analytic).epsilon(1e-9));
  }
}

TEST_CASE("rock spheres intersect rays at the closed-form distance") {
  TerrainSpec spec;
  spec.noise_amplitude = 0.0;
  spec.rocks.push_back({5.0, 0.0, 2.0});  // radius 2 sphere at x=5
  const Terrain terrain(spec);

  // Sphere center: 0.6 * radius above the flat surface.
  const Point3 center = terrain.rock_centers()[0];
  CHECK((center - Point3(5.0, 0.0, 1.2)).norm() < 1e-12);

  RigidTransform pose = RigidTransform::identity();
  pose.translation = Point3(0.0, 0.0, 1.2);  // level with the center

  ProjectionModel model;
  model.az_res = ProjectionModel::kPi / 360.0;
  model.el_res = ProjectionModel::kPi / 360.0;
  model.az_start = -ProjectionModel::kPi / 18.0;
  model.az_end = ProjectionModel::kPi / 18.0;
  model.el_start = -ProjectionModel::kPi / 36.0;
  model.el_end = ProjectionModel::kPi / 36.0;

  const PointCloud scan = synth_scan(terrain, pose, model);
  REQUIRE(!scan.points.empty());
  size_t sphere_hits = 0;
  for (const Point3& p : scan.points) {
    const double r = p.norm();
    const Point3 dir = p / r;
    // Closed-form ray-sphere solution from the sensor origin.
    const Point3 oc = pose.translation - center;
    const double b = 2.0 * dir.dot(oc);
    const double c = oc.squaredNorm() - 4.0;
    const double disc = b * b - 4.0 * c;
    if (disc <= 0.0) continue;  // ray misses the sphere: terrain hit
    const double t_sphere = (-b - std::sqrt(disc)) / 2.0;
    if (r < 4.9) {  // sphere hits are close; terrain hits behind are farther
      ++sphere_hits;
      CHECK(r == doctest::Approx(t_sphere).epsilon(1e-9));
    }
  }
  CHECK(sphere_hits > 100);
}

TEST_CASE("synthetic scans are deterministic and noise streams decorrelate") {
  TerrainSpec spec = random_terrain(11);
  spec.range_noise_sigma = 0.05;
  const Terrain terrain(spec);

  RigidTransform pose = RigidTransform::identity();
  pose.translation = Point3(0.0, 0.0, terrain.height(0.0, 0.0) + 1.5);

  ProjectionModel model;
  model.az_res = ProjectionModel::kPi / 90.0;
  model.el_res = ProjectionModel::kPi / 90.0;
  model.el_start = -ProjectionModel::kPi / 3.0;
  model.el_end = 0.0;

  const PointCloud a = synth_scan(terrain, pose, model, 0);
  const PointCloud b = synth_scan(terrain, pose, model, 0);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);

  const PointCloud c = synth_scan(terrain, pose, model, 1);
  REQUIRE(c.size() == a.size());
  size_t differing = 0;
  for (size_t i = 0; i < a.size(); ++i)
    differing += (a.points[i] - c.points[i]).norm() > 1e-12 ? 1 : 0;
  CHECK(differing > a.size() / 2);
}

TEST_CASE("every synthetic point lies exactly on its pixel ray") {
  TerrainSpec spec = random_terrain(3);
  const Terrain terrain(spec);
  RigidTransform pose = RigidTransform::identity();
  pose.translation = Point3(1.0, -2.0, terrain.height(1.0, -2.0) + 1.6);

  ProjectionModel model;
  model.az_res = ProjectionModel::kPi / 60.0;
  model.el_res = ProjectionModel::kPi / 60.0;
  model.el_start = -ProjectionModel::kPi / 3.0;
  model.el_end = 0.0;

  const PointCloud scan = synth_scan(terrain, pose, model);
  REQUIRE(scan.size() <= static_cast<size_t>(model.width() * model.height()));
  std::set<std::pair<int, int>> pixels;
  for (const Point3& p : scan.points) {
    const double az = std::atan2(p.y(), p.x());
    const double el = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    // Ray through the pixel center: angular deviation must be quantization-free.
    const double ucont = (az - model.az_start) / model.az_res - 0.5;
    const double vcont = (el - model.el_start) / model.el_res - 0.5;
    CHECK(std::abs(ucont - std::round(ucont)) < 1e-6);
    CHECK(std::abs(vcont - std::round(vcont)) < 1e-6);
    pixels.insert({static_cast<int>(std::round(ucont)),
                   static_cast<int>(std::round(vcont))});
  }
  CHECK(pixels.size() == scan.size());  // at most one return per ray
}

TEST_CASE("sensor below the surface is rejected") {
  TerrainSpec spec;  // flat-ish terrain around z=0
  spec.noise_amplitude = 0.0;
  RigidTransform pose = RigidTransform::identity();
  pose.translation = Point3(0.0, 0.0, -1.0);
  CHECK_THROWS_AS(synth_scan(spec, pose, ProjectionModel{}), Error);
}

TEST_CASE("accumulated map of true-pose scans stays near the terrain surface") {
  TerrainSpec spec = random_terrain(19);
  spec.range_noise_sigma = 0.01;
  const Terrain terrain(spec);

  ProjectionModel model;
  model.az_res = ProjectionModel::kPi / 90.0;
  model.el_res = ProjectionModel::kPi / 90.0;
  model.el_start = -ProjectionModel::kPi / 3.0;
  model.el_end = -ProjectionModel::kPi / 36.0;

  std::vector<RigidTransform> poses;
  std::vector<PointCloud> scans;
  for (int k = 0; k < 2; ++k) {
    RigidTransform pose = RigidTransform::identity();
    const double x = -1.0 + 2.0 * k;  // two nearby viewpoints, wide overlap
    pose.translation = Point3(x, 0.0, terrain.height(x, 0.0) + 1.6);
    poses.push_back(pose);
    scans.push_back(synth_scan(terrain, pose, model, static_cast<uint64_t>(k)));
  }

  const double cell = 0.05;
  const PointCloud map = accumulate_map(scans, poses, cell);
  REQUIRE(!map.points.empty());

  double sq_sum = 0.0;
  size_t counted = 0;
  for (const Point3& p : map.points) {
    if (!terrain.inside(p.x(), p.y())) continue;
    // Skip rock hits: they sit above the DEM by design.
    bool near_rock = false;
    for (const Point3& rc : terrain.rock_centers())
      near_rock = near_rock || (p - rc).norm() < 1.0;
    if (near_rock) continue;
    const double dz = p.z() - terrain.height(p.x(), p.y());
    sq_sum += dz * dz;
    ++counted;
  }
  REQUIRE(counted > 100);
  const double rms = std::sqrt(sq_sum / static_cast<double>(counted));
  CHECK(rms < spec.range_noise_sigma + cell);
}

TEST_CASE("pose files round trip with canonical quaternions") {
  SplitMix64 rng(23);
  std::vector<GroundTruthPose> poses;
  for (int i = 0; i < 12; ++i)
    poses.push_back({"scan_" + std::to_string(i), testutil::random_transform(rng, 8.0)});

  const auto dir = std::filesystem::temp_directory_path() / "curvreg_eval_test";
  const std::string path = (dir / "poses.txt").string();
  write_pose_file(poses, path);
  const std::vector<GroundTruthPose> loaded = read_pose_file(path);

  REQUIRE(loaded.size() == poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK(loaded[i].id == poses[i].id);
    CHECK(rotation_distance(loaded[i].pose.rotation, poses[i].pose.rotation) < 1e-12);
    CHECK((loaded[i].pose.translation - poses[i].pose.translation).norm() < 1e-12);
  }

  SUBCASE("comments and blank lines are skipped") {
    std::ofstream out(path, std::ios::app);
    out << "\n# trailing comment\n";
    out.close();
    CHECK(read_pose_file(path).size() == poses.size());
  }
  SUBCASE("malformed line is a parse error") {
    std::ofstream out(path, std::ios::app);
    out << "broken 1 2 3\n";
    out.close();
    CHECK_THROWS_AS(read_pose_file(path), Error);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation CSV artifacts have headers and rows") {
  const auto dir = std::filesystem::temp_directory_path() / "curvreg_eval_csv";
  const std::string ecdf_path = (dir / "ecdf.csv").string();
  const std::string rmse_path = (dir / "rmse.csv").string();

  write_ecdf_csv(ecdf({1.0, 2.0, 2.0, 3.0}), ecdf_path);
  write_rmse_csv({0.1, 0.02}, 0.25, 4, rmse_path);

  auto read_lines = [](const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };

  const auto ecdf_lines = read_lines(ecdf_path);
  REQUIRE(ecdf_lines.size() == 4);  // header + 3 distinct values
  CHECK(ecdf_lines[0] == "threshold,proportion");

  const auto rmse_lines = read_lines(rmse_path);
  REQUIRE(rmse_lines.size() == 5);  // header + 4 metrics
  CHECK(rmse_lines[0] == "metric,value");
  CHECK(rmse_lines[1].substr(0, 17) == "rmse_translation_");
  std::filesystem::remove_all(dir);
}
