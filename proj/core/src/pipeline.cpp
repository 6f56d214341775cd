#include "curvreg/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"
#include "json.hpp"

namespace curvreg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Re-raises library errors with the pipeline stage prepended, preserving the
// error code so callers can still branch on it.
template <typename Fn>
auto run_stage(const char* stage, double* slot, Fn&& fn) {
  const auto start = Clock::now();
  try {
    auto result = fn();
    if (slot != nullptr) *slot += seconds_since(start);
    return result;
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.message());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  projection.validate();
  if (!(range_min >= 0.0) || !(range_max > range_min))
    raise(ErrorCode::InvalidConfig, "range limits must satisfy 0 <= min < max");
  curvelet.validate();
  if (!(features.contrast_threshold >= 0.0))
    raise(ErrorCode::InvalidConfig, "contrast threshold must be non-negative");
  if (!(features.range_margin >= 0.0))
    raise(ErrorCode::InvalidConfig, "range margin must be non-negative");
  ransac.validate();
}

ScanFeatures extract_scan_features(const PointCloud& cloud, const PipelineConfig& cfg,
                                   StageTimings* timings) {
  cfg.validate();
  double* t_project = timings != nullptr ? &timings->project : nullptr;
  double* t_curvelet = timings != nullptr ? &timings->curvelet : nullptr;
  double* t_features = timings != nullptr ? &timings->features : nullptr;

  ScanFeatures out;
  out.image = run_stage("range-image", t_project, [&] {
    return make_range_image(cloud, cfg.projection, cfg.range_min, cfg.range_max);
  });
  const CurveletPyramid pyramid = run_stage("curvelet-transform", t_curvelet, [&] {
    return fdct_forward(out.image.normalized, cfg.curvelet);
  });
  out.features = run_stage("feature-detect", t_features, [&] {
    return extract_features(out.image, pyramid, cfg.features);
  });
  return out;
}

RegistrationResult register_pair(const PointCloud& model, const PointCloud& data,
                                 const PipelineConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();

  RegistrationResult result;
  const ScanFeatures model_scan = extract_scan_features(model, cfg, &result.timings);
  const ScanFeatures data_scan = extract_scan_features(data, cfg, &result.timings);
  result.model_keypoints = static_cast<long>(model_scan.features.keypoints.size());
  result.data_keypoints = static_cast<long>(data_scan.features.keypoints.size());

  const std::vector<Match> matches = run_stage("matching", &result.timings.match, [&] {
    return match_nn(model_scan.features.descriptors, data_scan.features.descriptors,
                    cfg.matcher);
  });
  result.match_count = static_cast<long>(matches.size());

  std::vector<Point3> model_points(model_scan.features.keypoints.size());
  for (size_t i = 0; i < model_points.size(); ++i)
    model_points[i] = model_scan.features.keypoints[i].world;
  std::vector<Point3> data_points(data_scan.features.keypoints.size());
  for (size_t i = 0; i < data_points.size(); ++i)
    data_points[i] = data_scan.features.keypoints[i].world;

  const RansacResult consensus = run_stage("ransac", &result.timings.ransac, [&] {
    return ransac_filter(matches, model_points, data_points, cfg.ransac);
  });

  // Final fit. The consensus transform is already a least-squares estimate
  // over every inlier, but inliers anchored on depth silhouettes sit on
  // occlusion boundaries whose world position shifts with the viewpoint, so
  // they agree with the consensus while pulling the fine alignment sideways.
  // When enough inliers rest on continuous surface, re-estimate from those
  // alone; the inlier count and residual statistics still cover the full
  // consensus set.
  result.transform = consensus.transform;
  result.residual_rms = consensus.residual_rms;
  CorrespondenceSet stable;
  for (size_t i = 0; i < matches.size(); ++i) {
    if (consensus.inlier_flags[i] == 0) continue;
    const Keypoint& m =
        model_scan.features.keypoints[static_cast<size_t>(matches[i].model_index)];
    const Keypoint& d =
        data_scan.features.keypoints[static_cast<size_t>(matches[i].data_index)];
    if (m.on_depth_edge || d.on_depth_edge) continue;
    stable.pairs.push_back({m.world, d.world});
  }
  constexpr size_t kMinStable = 8;
  if (stable.size() >= kMinStable && stable.size() < consensus.inliers.size()) {
    try {
      result.transform = run_stage("estimate-rigid-svd", nullptr,
                                   [&] { return estimate_rigid_svd(stable); });
      double sum_sq = 0.0;
      for (const Correspondence& c : consensus.inliers.pairs)
        sum_sq += (c.model - apply_transform(result.transform, c.data)).squaredNorm();
      result.residual_rms =
          std::sqrt(sum_sq / static_cast<double>(consensus.inliers.size()));
    } catch (const Error& e) {
      // A degenerate stable subset (collinear surface points) cannot anchor a
      // transform; the all-inlier consensus estimate stands.
      if (e.code() != ErrorCode::DegenerateCorrespondences) throw;
      result.transform = consensus.transform;
      result.residual_rms = consensus.residual_rms;
    }
  }

  result.inlier_count = static_cast<long>(consensus.inliers.size());
  result.timings.total = seconds_since(start);
  return result;
}

void write_result_json(const RegistrationResult& result, const std::string& path,
                       bool include_timings) {
  nlohmann::ordered_json doc;
  doc["comment"] = "transform maps data-frame coordinates into the model frame";
  auto& rotation = doc["rotation"] = nlohmann::ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation.push_back(result.transform.rotation(r, c));
  doc["translation"] = {result.transform.translation.x(),
                        result.transform.translation.y(),
                        result.transform.translation.z()};
  doc["inliers"] = result.inlier_count;
  doc["matches"] = result.match_count;
  doc["keypoints"] = {result.model_keypoints, result.data_keypoints};
  doc["residual_rms_m"] = result.residual_rms;
  if (include_timings) {
    doc["timings_s"] = {{"project", result.timings.project},
                        {"curvelet", result.timings.curvelet},
                        {"features", result.timings.features},
                        {"match", result.timings.match},
                        {"ransac", result.timings.ransac},
                        {"total", result.timings.total}};
  }
  atomic_write(path, [&](std::ostream& out) { out << doc.dump(2) << "\n"; });
}

}  // namespace curvreg
