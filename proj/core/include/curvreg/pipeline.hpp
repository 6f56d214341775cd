#pragma once

#include <string>

#include "curvreg/curvelet.hpp"
#include "curvreg/feature.hpp"
#include "curvreg/geometry.hpp"
#include "curvreg/matching.hpp"
#include "curvreg/range_image.hpp"

namespace curvreg {

struct PipelineConfig {
  ProjectionModel projection;
  double range_min = 0.5;   // meters
  double range_max = 200.0;
  CurveletConfig curvelet;
  FeatureConfig features;
  MatchConfig matcher;
  RansacConfig ransac;

  /// Throws InvalidConfig when any sub-configuration is out of range.
  void validate() const;
};

struct StageTimings {
  double project = 0.0;   // seconds; both scans combined per stage
  double curvelet = 0.0;
  double features = 0.0;
  double match = 0.0;
  double ransac = 0.0;
  double total = 0.0;
};

struct RegistrationResult {
  RigidTransform transform;  // maps data-frame coordinates into the model frame
  long model_keypoints = 0;
  long data_keypoints = 0;
  long match_count = 0;
  long inlier_count = 0;
  double residual_rms = 0.0;  // meters, over inliers under the final transform
  StageTimings timings;
};

/// Per-scan front half of the pipeline: range image, curvelet pyramid,
/// keypoints + descriptors. Errors carry their stage name.
struct ScanFeatures {
  RangeImage image;
  FeatureSet features;
};
ScanFeatures extract_scan_features(const PointCloud& cloud, const PipelineConfig& cfg,
                                   StageTimings* timings = nullptr);

/// Full pairwise registration: project -> fill -> smooth/normalize ->
/// curvelet transform -> difference-of-curvelet extrema -> descriptors ->
/// nearest-neighbour matching -> RANSAC -> SVD re-estimation. The returned
/// transform maps data coordinates into the model frame. Every propagated
/// error message is prefixed with the failing stage.
RegistrationResult register_pair(const PointCloud& model, const PointCloud& data,
                                 const PipelineConfig& cfg);

/// Result JSON: rotation (9 row-major doubles), translation (3), inliers,
/// matches, keypoints [model, data], residual_rms_m, and timings_s unless
/// include_timings is false (deterministic byte-identical output for tests).
void write_result_json(const RegistrationResult& result, const std::string& path,
                       bool include_timings = true);

}  // namespace curvreg
