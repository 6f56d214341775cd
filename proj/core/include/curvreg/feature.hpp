#pragma once

#include <array>
#include <string>
#include <vector>

#include "curvreg/curvelet.hpp"
#include "curvreg/grid.hpp"
#include "curvreg/range_image.hpp"

namespace curvreg {

/// Band-pass stack: level k is the difference between the cumulative
/// reconstructions from scales 1..k+2 and 1..k+1, which by linearity equals
/// the band image of scale k+2 alone. Ordered coarse to fine, n_scales - 1
/// levels; the DC-carrying coarsest band cancels out of every level.
struct DocStack {
  std::vector<Grid<double>> levels;

  int num_levels() const noexcept { return static_cast<int>(levels.size()); }
};

struct Keypoint {
  int u = 0;            // pixel column
  int v = 0;            // pixel row
  int doc_level = 0;    // index into DocStack::levels
  double response = 0.0;  // stack value at the extremum
  Point3 world = Point3::Zero();  // populated by filter_keypoints
  // True when the surrounding range patch spans a depth discontinuity; such
  // world anchors sit on occlusion silhouettes and migrate with viewpoint.
  bool on_depth_edge = false;
};

/// 4x4 spatial cells x 8 orientation bins, unit L2 norm.
using Descriptor = std::array<double, 128>;

double descriptor_distance(const Descriptor& a, const Descriptor& b);

struct FeatureConfig {
  double contrast_threshold = 0.03;  // fraction of normalized intensity
  double range_margin = 0.5;         // meters beyond min_range
};

/// Differences of consecutive cumulative reconstructions (see DocStack).
/// Throws TooFewScales when the pyramid has fewer than 3 scales.
DocStack build_doc_stack(const CurveletPyramid& pyramid);

/// Scale-space extrema: a pixel at an interior level is kept iff strictly
/// greater or strictly smaller than all 26 neighbours (8 in-level, 9 in each
/// adjacent level). Pixels on the image border are excluded. Results sorted
/// by (level, v, u). Throws TooFewScales when the stack has < 3 levels.
std::vector<Keypoint> detect_extrema(const DocStack& stack);

/// Keeps keypoints with |response| >= contrast_threshold whose back-projection
/// succeeds with range >= min_range + range_margin, and fills their world
/// position from the raw range data.
std::vector<Keypoint> filter_keypoints(const std::vector<Keypoint>& keypoints,
                                       const RangeImage& img,
                                       double contrast_threshold,
                                       double range_margin);

/// Gradient-histogram descriptor over the 16x16 window around the keypoint on
/// the normalized range image: central-difference gradients, trilinear
/// interpolation into 4x4 cells x 8 orientation bins, Gaussian weighting
/// (sigma 8), 0.2 bin clamp, unit L2 norm. Throws ZeroGradient when the
/// window has no gradient energy.
Descriptor compute_descriptor(const Grid<double>& normalized, const Keypoint& kp);

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;  // aligned with keypoints
};

/// Full detection pass: DoC stack, extrema, filtering, description. Keypoints
/// whose descriptor has zero gradient energy are dropped.
FeatureSet extract_features(const RangeImage& img, const CurveletPyramid& pyramid,
                            const FeatureConfig& cfg);

/// CSV dump `u,v,level,response,x,y,z` (one header line, then one line per
/// keypoint) and the matching binary descriptor dump: little-endian
/// float32 x 128 records in CSV order.
void write_keypoints_csv(const FeatureSet& features, const std::string& path);
void write_descriptors_f32(const FeatureSet& features, const std::string& path);

}  // namespace curvreg
