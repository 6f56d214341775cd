#include "curvreg_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "CLI11.hpp"
#include "curvreg/cloud_io.hpp"
#include "curvreg/config.hpp"
#include "curvreg/error.hpp"
#include "curvreg/evaluation.hpp"
#include "curvreg/io_util.hpp"
#include "curvreg/pipeline.hpp"
#include "curvreg/rng.hpp"

namespace curvreg_cli {

namespace {

namespace fs = std::filesystem;
using namespace curvreg;

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_given = false;
  bool no_timings = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
  if (args.seed_given) {
    cfg.seed = args.seed;
    cfg.pipeline.ransac.rng_seed = args.seed;
  }
  cfg.validate();
  return cfg;
}

PointCloud load_cloud_verbose(const std::string& path) {
  LoadReport report;
  PointCloud cloud = load_cloud(path, &report);
  if (report.dropped_records > 0)
    std::cerr << "warning: " << path << ": dropped " << report.dropped_records
              << " non-finite point records\n";
  return cloud;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

int run_project(const std::string& cloud_path, const std::string& out,
                const RunConfig& cfg) {
  const PointCloud cloud = load_cloud_verbose(cloud_path);
  const RangeImage img = make_range_image(cloud, cfg.pipeline.projection,
                                          cfg.pipeline.range_min, cfg.pipeline.range_max);
  write_range_image_pgm(img, out);
  size_t valid = 0;
  for (const unsigned char m : img.valid_mask) valid += m;
  std::cout << "projected " << cloud.size() << " points to " << img.normalized.width()
            << "x" << img.normalized.height() << " (" << valid << " valid px) -> "
            << out << "\n";
  return 0;
}

int run_coeffs(const std::string& cloud_path, const std::string& out,
               const std::string& binary_out, const RunConfig& cfg) {
  const PointCloud cloud = load_cloud_verbose(cloud_path);
  const RangeImage img = make_range_image(cloud, cfg.pipeline.projection,
                                          cfg.pipeline.range_min, cfg.pipeline.range_max);
  const CurveletPyramid pyramid = fdct_forward(img.normalized, cfg.pipeline.curvelet);
  write_pgm16(coefficient_mosaic(pyramid), out);
  if (!binary_out.empty()) write_coefficients(pyramid, binary_out);
  std::cout << "curvelet mosaic (" << pyramid.num_scales() << " scales) -> " << out
            << "\n";
  return 0;
}

int run_features(const std::string& cloud_path, const std::string& prefix,
                 const RunConfig& cfg) {
  const PointCloud cloud = load_cloud_verbose(cloud_path);
  const ScanFeatures scan = extract_scan_features(cloud, cfg.pipeline);
  write_keypoints_csv(scan.features, prefix + ".csv");
  write_descriptors_f32(scan.features, prefix + ".desc");
  std::cout << scan.features.keypoints.size() << " keypoints -> " << prefix
            << ".csv / .desc\n";
  return 0;
}

int run_register(const std::string& model_path, const std::string& data_path,
                 const std::string& out, const std::string& matches_out,
                 const RunConfig& cfg, bool no_timings) {
  const PointCloud model = load_cloud_verbose(model_path);
  const PointCloud data = load_cloud_verbose(data_path);

  RegistrationResult result;
  if (matches_out.empty()) {
    result = register_pair(model, data, cfg.pipeline);
  } else {
    // Run the stages here so the match list can be dumped alongside.
    const ScanFeatures ms = extract_scan_features(model, cfg.pipeline, &result.timings);
    const ScanFeatures ds = extract_scan_features(data, cfg.pipeline, &result.timings);
    const std::vector<Match> matches =
        match_nn(ms.features.descriptors, ds.features.descriptors, cfg.pipeline.matcher);
    std::vector<Point3> mp(ms.features.keypoints.size());
    for (size_t i = 0; i < mp.size(); ++i) mp[i] = ms.features.keypoints[i].world;
    std::vector<Point3> dp(ds.features.keypoints.size());
    for (size_t i = 0; i < dp.size(); ++i) dp[i] = ds.features.keypoints[i].world;
    const RansacResult consensus =
        ransac_filter(matches, mp, dp, cfg.pipeline.ransac);
    write_matches_csv(matches, consensus.inlier_flags, matches_out);
    result.transform = consensus.transform;
    result.model_keypoints = static_cast<long>(ms.features.keypoints.size());
    result.data_keypoints = static_cast<long>(ds.features.keypoints.size());
    result.match_count = static_cast<long>(matches.size());
    result.inlier_count = static_cast<long>(consensus.inliers.size());
    result.residual_rms = consensus.residual_rms;
  }

  write_result_json(result, out, !no_timings);
  std::cout << "registered: " << result.inlier_count << "/" << result.match_count
            << " inliers, rms " << result.residual_rms << " m -> " << out << "\n";
  return 0;
}

std::vector<std::string> list_scan_files(const std::string& dir,
                                         const std::string& truth_path) {
  std::vector<std::string> files;
  const fs::path truth = truth_path.empty() ? fs::path() : fs::absolute(truth_path);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext != ".ply" && ext != ".xyz" && ext != ".txt") continue;
    // Dataset metadata that lives next to the scans, never a scan itself.
    const std::string name = entry.path().filename().string();
    if (name == "truth.txt" || name == "config.txt") continue;
    if (!truth.empty() && fs::absolute(entry.path()) == truth) continue;
    files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
    return fs::path(a).filename().string() < fs::path(b).filename().string();
  });
  return files;
}

int run_batch(const std::string& dir, const std::string& truth_path,
              const std::string& outdir, const RunConfig& cfg, bool no_timings) {
  const std::vector<std::string> files = list_scan_files(dir, truth_path);
  if (files.size() < 2)
    raise(ErrorCode::InvalidConfig, dir + " holds fewer than 2 scan files");

  // Chain nodes: scan 0, stride, 2*stride, ... consecutive nodes form pairs.
  std::vector<size_t> nodes;
  for (size_t i = 0; i < files.size(); i += static_cast<size_t>(cfg.stride))
    nodes.push_back(i);
  if (nodes.size() < 2)
    raise(ErrorCode::InvalidConfig, "stride leaves fewer than 2 scans");

  std::map<std::string, RigidTransform> truth;
  if (!truth_path.empty())
    for (const GroundTruthPose& entry : read_pose_file(truth_path))
      truth[entry.id] = entry.pose;

  std::vector<PointCloud> clouds(nodes.size());
  std::vector<std::string> stems(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) {
    clouds[k] = load_cloud_verbose(files[nodes[k]]);
    stems[k] = stem_of(files[nodes[k]]);
    if (!truth_path.empty() && truth.count(stems[k]) == 0)
      raise(ErrorCode::InvalidConfig, "no ground-truth pose for scan " + stems[k]);
  }

  fs::create_directories(outdir);
  std::vector<RigidTransform> estimated;
  std::vector<ErrorSample> samples;
  std::vector<double> t_errors, r_errors;

  for (size_t k = 0; k + 1 < nodes.size(); ++k) {
    const RegistrationResult result =
        register_pair(clouds[k], clouds[k + 1], cfg.pipeline);
    const std::string pair_name = stems[k] + "__" + stems[k + 1];
    write_result_json(result, (fs::path(outdir) / ("pair_" + pair_name + ".json")).string(),
                      !no_timings);
    estimated.push_back(result.transform);

    std::cout << "pair " << pair_name << ": " << result.inlier_count << "/"
              << result.match_count << " inliers, rms " << result.residual_rms
              << " m\n";

    if (!truth_path.empty()) {
      const RigidTransform rel =
          compose(inverse(truth.at(stems[k])), truth.at(stems[k + 1]));
      ErrorSample sample = pair_error(result.transform, rel);
      sample.pair_id = pair_name;
      samples.push_back(sample);
      t_errors.push_back(sample.translation_error);
      r_errors.push_back(sample.rotation_error);
    }
  }

  const std::vector<RigidTransform> poses = integrate_trajectory(estimated);
  std::vector<GroundTruthPose> trajectory(poses.size());
  for (size_t k = 0; k < poses.size(); ++k) trajectory[k] = {stems[k], poses[k]};
  write_pose_file(trajectory, (fs::path(outdir) / "trajectory.txt").string());

  const PointCloud map = accumulate_map(clouds, poses, cfg.voxel_size);
  write_cloud(map, (fs::path(outdir) / "map.ply").string(), CloudFormat::PlyBinary);

  if (!truth_path.empty()) {
    write_ecdf_csv(ecdf(t_errors), (fs::path(outdir) / "ecdf_translation.csv").string());
    write_ecdf_csv(ecdf(r_errors), (fs::path(outdir) / "ecdf_rotation.csv").string());
    const RmseSummary summary = rmse(samples);
    const double failures = failure_rate(r_errors, cfg.rotation_failure_threshold);
    write_rmse_csv(summary, failures, samples.size(),
                   (fs::path(outdir) / "rmse_summary.csv").string());
    std::cout << "RMSE: " << summary.translation << " m, " << summary.rotation
              << " rad over " << samples.size() << " pairs (failure rate " << failures
              << ")\n";
  }
  std::cout << "map: " << map.size() << " points -> " << outdir << "\n";
  return 0;
}

int run_synth(const std::string& outdir, const RunConfig& cfg, int count,
              double noise_sigma) {
  if (count < 2) raise(ErrorCode::InvalidConfig, "synth needs --count >= 2");

  TerrainSpec spec = random_terrain(cfg.seed);
  spec.range_noise_sigma = noise_sigma;
  const Terrain terrain(spec);

  fs::create_directories(outdir);
  SplitMix64 rng(mix_seed(cfg.seed, 0x70a6e5));
  double heading = rng.uniform(-0.4, 0.4);
  double x = -9.0, y = -5.0;

  std::vector<GroundTruthPose> truth(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    if (k > 0) {
      const double advance = rng.uniform(1.2, 2.4);
      heading += rng.uniform(-0.35, 0.35);
      x += advance * std::cos(heading);
      y += advance * std::sin(heading);
    }
    const double z = terrain.height(x, y) + 1.7;
    const double pitch = rng.uniform(-0.05, 0.05);
    const double roll = rng.uniform(-0.02, 0.02);

    RigidTransform pose;
    pose.rotation = (Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()) *
                     Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                     Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                        .toRotationMatrix();
    pose.translation = Point3(x, y, z);

    const PointCloud scan =
        synth_scan(terrain, pose, cfg.pipeline.projection, static_cast<uint64_t>(k));
    char name[32];
    std::snprintf(name, sizeof(name), "scan_%03d", k);
    write_cloud(scan, (fs::path(outdir) / (std::string(name) + ".ply")).string(),
                CloudFormat::PlyBinary);
    truth[static_cast<size_t>(k)] = {name, pose};
    std::cout << name << ": " << scan.size() << " points\n";
  }
  write_pose_file(truth, (fs::path(outdir) / "truth.txt").string());
  write_run_config(cfg, (fs::path(outdir) / "config.txt").string());
  std::cout << count << " scans -> " << outdir << "\n";
  return 0;
}

int run_selftest(const RunConfig& cfg) {
  int passed = 0, total = 0;
  auto check = [&](const char* name, bool ok) {
    ++total;
    passed += ok ? 1 : 0;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
  };

  {
    SplitMix64 rng(cfg.seed);
    Grid<double> img(96, 80);
    for (double& v : img) v = rng.uniform(-1.0, 1.0);
    CurveletConfig cc;
    cc.n_scales = 3;
    const CurveletPyramid pyr = fdct_forward(img, cc);
    double energy = 0.0;
    for (const double v : img) energy += v * v;
    check("curvelet tight frame (96x80, 3 scales)",
          std::abs(pyr.total_energy() / energy - 1.0) < 1e-10);

    const Grid<double> back = fdct_inverse(pyr);
    double max_err = 0.0, max_abs = 0.0;
    for (size_t i = 0; i < img.size(); ++i) {
      max_err = std::max(max_err, std::abs(back.data()[i] - img.data()[i]));
      max_abs = std::max(max_abs, std::abs(img.data()[i]));
    }
    check("curvelet perfect reconstruction", max_err < 1e-10 * max_abs);

    Grid<double> sum(img.width(), img.height(), 0.0);
    for (int j = 1; j <= cc.n_scales; ++j) {
      const Grid<double> part = reconstruct_scale(pyr, j);
      for (size_t i = 0; i < sum.size(); ++i) sum.data()[i] += part.data()[i];
    }
    double part_err = 0.0;
    for (size_t i = 0; i < sum.size(); ++i)
      part_err = std::max(part_err, std::abs(sum.data()[i] - back.data()[i]));
    check("curvelet scale partition", part_err < 1e-10);
  }

  {
    SplitMix64 rng(mix_seed(cfg.seed, 7));
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
      Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
      q.normalize();
      RigidTransform truth;
      truth.rotation = q.toRotationMatrix();
      truth.translation = Point3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
      CorrespondenceSet set;
      for (int i = 0; i < 10; ++i) {
        const Point3 d(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
        set.pairs.push_back({apply_transform(truth, d), d});
      }
      const RigidTransform est = estimate_rigid_svd(set);
      ok = rotation_distance(est.rotation, truth.rotation) < 1e-9 &&
           (est.translation - truth.translation).norm() < 1e-9;
    }
    check("SVD alignment exact on noiseless correspondences", ok);
  }

  {
    SplitMix64 rng(mix_seed(cfg.seed, 13));
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      RigidTransform truth;
      truth.rotation =
          Eigen::AngleAxisd(rng.uniform(-0.5, 0.5), Eigen::Vector3d::UnitZ())
              .toRotationMatrix();
      truth.translation = Point3(rng.uniform(-2, 2), rng.uniform(-2, 2), 0.3);
      std::vector<Point3> mp, dp;
      std::vector<Match> matches;
      for (int i = 0; i < 10; ++i) {
        const Point3 d(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-2, 2));
        dp.push_back(d);
        mp.push_back(apply_transform(truth, d));
        matches.push_back({i, i, 0.0});
      }
      for (int i = 10; i < 20; ++i) {
        dp.push_back(Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-2, 2)));
        mp.push_back(Point3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-2, 2)));
        matches.push_back({i, i, 0.0});
      }
      RansacConfig rc;
      rc.rng_seed = static_cast<uint64_t>(trial);
      const RansacResult res = ransac_filter(matches, mp, dp, rc);
      ok = res.inliers.size() == 10 &&
           rotation_distance(res.transform.rotation, truth.rotation) < 1e-6 &&
           (res.transform.translation - truth.translation).norm() < 1e-6;
    }
    check("RANSAC recovers planted transform under 50% outliers", ok);
  }

  {
    const fs::path tmp = fs::temp_directory_path() / "curvreg_selftest.ply";
    PointCloud cloud;
    SplitMix64 rng(mix_seed(cfg.seed, 21));
    for (int i = 0; i < 1000; ++i)
      cloud.points.push_back(
          Point3(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)));
    write_cloud(cloud, tmp.string(), CloudFormat::PlyBinary);
    const PointCloud loaded = load_cloud(tmp.string());
    bool ok = loaded.size() == cloud.size();
    for (size_t i = 0; ok && i < cloud.size(); ++i)
      ok = loaded.points[i] == cloud.points[i];
    fs::remove(tmp);
    check("binary PLY round trip is bit-exact", ok);
  }

  std::cout << "selftest: " << passed << "/" << total << " checks passed\n";
  return passed == total ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"curvelet-based 3D laser scan registration"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&](CLI::App* sub, bool with_timings_flag) {
    sub->add_option("--config", common.config_path, "key=value configuration file");
    sub->add_option("--seed", common.seed, "RNG seed (overrides the config file)")
        ->default_val(0);
    if (with_timings_flag)
      sub->add_flag("--no-timings", common.no_timings,
                    "omit wall-time fields for byte-reproducible output");
  };

  std::string cloud_path, model_path, data_path, out, binary_out, matches_out;
  std::string dir, truth_path;
  int synth_count = 6;
  double synth_noise = 0.02;

  CLI::App* project = app.add_subcommand("project", "point cloud -> range image PGM");
  project->add_option("cloud", cloud_path, "input point cloud")->required();
  project->add_option("-o,--out", out, "output PGM path")->required();
  add_common(project, false);

  CLI::App* coeffs =
      app.add_subcommand("coeffs", "point cloud -> curvelet coefficient mosaic");
  coeffs->add_option("cloud", cloud_path, "input point cloud")->required();
  coeffs->add_option("-o,--out", out, "output mosaic PGM path")->required();
  coeffs->add_option("--binary-out", binary_out, "binary coefficient dump path");
  add_common(coeffs, false);

  CLI::App* features =
      app.add_subcommand("features", "point cloud -> keypoint CSV + descriptor dump");
  features->add_option("cloud", cloud_path, "input point cloud")->required();
  features->add_option("-o,--out", out, "output path prefix")->required();
  add_common(features, false);

  CLI::App* reg = app.add_subcommand("register", "register two point clouds");
  reg->add_option("model", model_path, "model (reference) cloud")->required();
  reg->add_option("data", data_path, "data cloud mapped into the model frame")
      ->required();
  reg->add_option("-o,--out", out, "output result JSON path")->required();
  reg->add_option("--matches-out", matches_out, "match CSV dump path");
  add_common(reg, true);

  CLI::App* batch =
      app.add_subcommand("batch", "register a scan directory and evaluate");
  batch->add_option("--dir", dir,
                    "directory of scan files (.ply/.xyz/.txt; truth.txt and "
                    "config.txt are skipped)")
      ->required();
  batch->add_option("--truth", truth_path, "ground-truth pose file");
  batch->add_option("-o,--out", out, "output directory")->required();
  add_common(batch, true);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scan set");
  synth->add_option("-o,--out", out, "output directory")->required();
  synth->add_option("--count", synth_count, "number of scans")->default_val(6);
  synth->add_option("--noise", synth_noise, "range noise sigma in meters")
      ->default_val(0.02);
  add_common(synth, false);

  CLI::App* selftest = app.add_subcommand("selftest", "run built-in property checks");
  add_common(selftest, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (CLI::App* sub : {project, coeffs, features, reg, batch, synth, selftest})
      if (sub->parsed()) common.seed_given = sub->count("--seed") > 0;
    const RunConfig cfg = resolve_config(common);

    if (project->parsed()) return run_project(cloud_path, out, cfg);
    if (coeffs->parsed()) return run_coeffs(cloud_path, out, binary_out, cfg);
    if (features->parsed()) return run_features(cloud_path, out, cfg);
    if (reg->parsed())
      return run_register(model_path, data_path, out, matches_out, cfg,
                          common.no_timings);
    if (batch->parsed())
      return run_batch(dir, truth_path, out, cfg, common.no_timings);
    if (synth->parsed()) return run_synth(out, cfg, synth_count, synth_noise);
    if (selftest->parsed()) return run_selftest(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace curvreg_cli
