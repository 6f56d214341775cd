#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Geometry>

#include "curvreg/error.hpp"
#include "curvreg/evaluation.hpp"
#include "curvreg/pipeline.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace curvreg;

namespace {

// Downward-looking scanner band: enough elevation span for terrain texture,
// small enough to keep tests fast.
PipelineConfig test_config() {
  PipelineConfig cfg;
  cfg.projection.az_res = ProjectionModel::kPi / 180.0;  // 1 deg -> 360 px wide
  cfg.projection.el_res = ProjectionModel::kPi / 180.0;
  cfg.projection.el_start = -ProjectionModel::kPi / 3.0;
  cfg.projection.el_end = ProjectionModel::kPi / 18.0;   // 70 deg -> 70 px tall
  // 4 scales is the minimum the extrema detector accepts (3 stack levels);
  // the 70 px band still admits it (needs 2^6 = 64).
  cfg.curvelet.n_scales = 4;
  return cfg;
}

RigidTransform ground_pose(const Terrain& terrain, double x, double y, double yaw) {
  RigidTransform pose;
  pose.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  pose.translation = Point3(x, y, terrain.height(x, y) + 1.7);
  return pose;
}

}  // namespace

TEST_CASE("pipeline config validation covers the sub-configs") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  cfg.range_min = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = PipelineConfig{};
  cfg.curvelet.n_scales = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = PipelineConfig{};
  cfg.ransac.inlier_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = PipelineConfig{};
  cfg.projection.az_res = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("self-registration returns the identity with full consensus") {
  TerrainSpec spec = random_terrain(42);
  spec.range_noise_sigma = 0.01;
  const Terrain terrain(spec);
  const PipelineConfig cfg = test_config();
  const PointCloud scan =
      synth_scan(terrain, ground_pose(terrain, 0.0, 0.0, 0.0), cfg.projection);

  const RegistrationResult result = register_pair(scan, scan, cfg);
  CHECK(rotation_angle(result.transform.rotation) < 1e-6);
  CHECK(result.transform.translation.norm() < 1e-6);
  CHECK(result.inlier_count == result.match_count);
  CHECK(result.residual_rms < 1e-9);
  CHECK(result.model_keypoints == result.data_keypoints);
  CHECK(result.match_count > 0);
}

TEST_CASE("planted transform between overlapping scans is recovered") {
  TerrainSpec spec = random_terrain(7);
  spec.range_noise_sigma = 0.02;
  const Terrain terrain(spec);
  const PipelineConfig cfg = test_config();

  // Model at origin; data sensor moved 1.0 m with 0.1 rad yaw.
  const RigidTransform pose_a = ground_pose(terrain, 0.0, 0.0, 0.0);
  const RigidTransform pose_b = ground_pose(terrain, 0.8, 0.6, 0.1);
  const PointCloud model = synth_scan(terrain, pose_a, cfg.projection, 0);
  const PointCloud data = synth_scan(terrain, pose_b, cfg.projection, 1);

  const RegistrationResult result = register_pair(model, data, cfg);

  // True relative transform: model_pose^-1 * data_pose maps data -> model.
  const RigidTransform truth = compose(inverse(pose_a), pose_b);
  const ErrorSample err = pair_error(result.transform, truth);
  CHECK(err.translation_error < 0.1);
  CHECK(err.rotation_error < 0.02);
  CHECK(result.inlier_count >= 5);
}

TEST_CASE("registering both directions composes to near-identity on average") {
  // register(A,B) maps B into A's frame and register(B,A) the reverse, so
  // their composition should cancel. Each direction carries its own
  // registration error, hence the statistical bound of twice the single-pair
  // recovery bound (0.1 m / 0.02 rad), on the mean over several pairs rather
  // than per pair.
  const PipelineConfig cfg = test_config();
  double sum_t = 0.0, sum_r = 0.0;
  constexpr int kPairs = 4;
  for (int i = 0; i < kPairs; ++i) {
    TerrainSpec spec = random_terrain(21 + static_cast<uint64_t>(i));
    spec.range_noise_sigma = 0.02;
    const Terrain terrain(spec);
    const RigidTransform pose_a = ground_pose(terrain, 0.0, 0.0, 0.0);
    const RigidTransform pose_b = ground_pose(terrain, 0.8, -0.5, 0.08);
    const PointCloud a = synth_scan(terrain, pose_a, cfg.projection, 0);
    const PointCloud b = synth_scan(terrain, pose_b, cfg.projection, 1);

    const RegistrationResult ab = register_pair(a, b, cfg);
    const RegistrationResult ba = register_pair(b, a, cfg);
    const RigidTransform round_trip = compose(ab.transform, ba.transform);
    sum_t += round_trip.translation.norm();
    sum_r += rotation_angle(round_trip.rotation);
  }
  CHECK(sum_t / kPairs < 0.2);
  CHECK(sum_r / kPairs < 0.04);
}

TEST_CASE("disjoint scans cannot reach a consensus") {
  // Scans of two unrelated terrains: no shared surface exists, so matches
  // are spurious and no geometrically consistent consensus can form.
  const Terrain terrain_a((random_terrain(13)));
  const Terrain terrain_b((random_terrain(14)));
  PipelineConfig cfg = test_config();
  cfg.ransac.min_inliers = 5;

  const PointCloud a =
      synth_scan(terrain_a, ground_pose(terrain_a, 0.0, 0.0, 0.0), cfg.projection, 0);
  const PointCloud b =
      synth_scan(terrain_b, ground_pose(terrain_b, 0.0, 0.0, 0.0), cfg.projection, 1);

  try {
    const RegistrationResult r = register_pair(a, b, cfg);
    // A degenerate "success" must at least be geometrically useless.
    CHECK(r.inlier_count < 8);
  } catch (const Error& e) {
    const bool expected = e.code() == ErrorCode::ConsensusFailure ||
                          e.code() == ErrorCode::InsufficientMatches ||
                          e.code() == ErrorCode::NoFeatures;
    CHECK(expected);
  }
}

TEST_CASE("stage errors carry the failing stage in the message") {
  const PipelineConfig cfg = test_config();
  PointCloud tiny;
  tiny.points.push_back(Point3(100.0, 100.0, 100.0));  // beyond range_max

  try {
    register_pair(tiny, tiny, cfg);
    FAIL("expected a stage error");
  } catch (const Error& e) {
    CHECK(e.message().find("range-image") != std::string::npos);
  }
}

TEST_CASE("registration is deterministic across repeated runs") {
  TerrainSpec spec = random_terrain(3);
  spec.range_noise_sigma = 0.02;
  const Terrain terrain(spec);
  const PipelineConfig cfg = test_config();
  const PointCloud model =
      synth_scan(terrain, ground_pose(terrain, 0.0, 0.0, 0.0), cfg.projection, 0);
  const PointCloud data =
      synth_scan(terrain, ground_pose(terrain, 1.0, 0.0, 0.05), cfg.projection, 1);

  const RegistrationResult a = register_pair(model, data, cfg);
  const RegistrationResult b = register_pair(model, data, cfg);
  CHECK(a.transform.rotation == b.transform.rotation);
  CHECK(a.transform.translation == b.transform.translation);
  CHECK(a.match_count == b.match_count);
  CHECK(a.inlier_count == b.inlier_count);
  CHECK(a.residual_rms == b.residual_rms);
}

TEST_CASE("scan features expose image and aligned descriptor lists") {
  TerrainSpec spec = random_terrain(5);
  const Terrain terrain(spec);
  const PipelineConfig cfg = test_config();
  const PointCloud scan =
      synth_scan(terrain, ground_pose(terrain, 0.0, 0.0, 0.0), cfg.projection);

  StageTimings timings;
  const ScanFeatures features = extract_scan_features(scan, cfg, &timings);
  CHECK(!features.features.keypoints.empty());
  CHECK(features.features.keypoints.size() == features.features.descriptors.size());
  CHECK(features.image.normalized.width() == cfg.projection.width());
  CHECK(timings.project > 0.0);
  CHECK(timings.curvelet > 0.0);
  CHECK(timings.features > 0.0);

  SUBCASE("keypoint world positions sit on the scanned surface") {
    for (const Keypoint& kp : features.features.keypoints) {
      CHECK(kp.world.norm() >= cfg.range_min + cfg.features.range_margin);
      CHECK(kp.world.norm() <= cfg.range_max);
    }
  }
}

TEST_CASE("result JSON is complete and honours the timings switch") {
  TerrainSpec spec = random_terrain(9);
  const Terrain terrain(spec);
  const PipelineConfig cfg = test_config();
  const PointCloud scan =
      synth_scan(terrain, ground_pose(terrain, 0.0, 0.0, 0.0), cfg.projection);
  const RegistrationResult result = register_pair(scan, scan, cfg);

  const auto dir = std::filesystem::temp_directory_path() / "curvreg_pipe_json";
  const std::string with = (dir / "with.json").string();
  const std::string without = (dir / "without.json").string();
  write_result_json(result, with, true);
  write_result_json(result, without, false);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const std::string body = slurp(with);
  CHECK(body.find("\"rotation\"") != std::string::npos);
  CHECK(body.find("\"translation\"") != std::string::npos);
  CHECK(body.find("\"residual_rms_m\"") != std::string::npos);
  CHECK(body.find("\"timings_s\"") != std::string::npos);

  const std::string lean = slurp(without);
  CHECK(lean.find("\"timings_s\"") == std::string::npos);
  CHECK(lean.find("\"rotation\"") != std::string::npos);

  SUBCASE("timings-free output is byte-stable across runs") {
    const RegistrationResult again = register_pair(scan, scan, cfg);
    const std::string second = (dir / "second.json").string();
    write_result_json(again, second, false);
    CHECK(slurp(second) == lean);
  }
  std::filesystem::remove_all(dir);
}
