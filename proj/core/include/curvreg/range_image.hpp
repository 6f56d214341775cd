#pragma once

#include <string>

#include "curvreg/geometry.hpp"
#include "curvreg/grid.hpp"

namespace curvreg {

/// Spherical projection geometry. Azimuth = atan2(y, x), elevation =
/// atan2(z, sqrt(x^2 + y^2)); pixel u indexes azimuth from az_start, pixel v
/// indexes elevation from el_start. Spans are half-open: [start, end).
struct ProjectionModel {
  double az_start = -kPi;        // radians
  double az_end = kPi;
  double el_start = -kPi / 2.0;
  double el_end = kPi / 2.0;
  double az_res = kPi / 360.0;   // radians per pixel, default 0.5 deg
  double el_res = kPi / 360.0;

  static constexpr double kPi = 3.14159265358979323846;

  int width() const;   // ceil(azimuth span / az_res)
  int height() const;  // ceil(elevation span / el_res)

  /// Throws InvalidConfig when resolutions are non-positive or spans empty.
  void validate() const;

  friend bool operator==(const ProjectionModel&, const ProjectionModel&) = default;
};

/// A projected scan. raw_range holds NaN where no return was recorded;
/// valid_mask marks pixels with a finite raw range inside [min_range,
/// max_range]. filled_range equals raw_range at valid pixels and carries
/// interpolated values inside enclosed holes; defined_mask marks valid or
/// filled pixels. normalized is the smoothed range affinely mapped to [0, 1]
/// over defined pixels (0 elsewhere).
struct RangeImage {
  ProjectionModel model;
  double min_range = 0.5;   // meters
  double max_range = 200.0;

  Grid<double> raw_range;
  Grid<unsigned char> valid_mask;
  Grid<double> filled_range;
  Grid<unsigned char> defined_mask;
  Grid<double> normalized;
};

/// Projects a cloud through the model, keeping the minimum range per pixel.
/// Throws EmptyCloud for an empty input and EmptyProjection when no point
/// lands inside the spans within [min_range, max_range].
RangeImage project(const PointCloud& cloud, const ProjectionModel& model,
                   double min_range = 0.5, double max_range = 200.0);

/// Fills invalid regions that are enclosed by valid pixels (not 4-connected
/// to the border through invalid pixels). Each dilation round assigns every
/// uncovered hole pixel the mean of its already-covered 8-neighbours, all
/// rounds Jacobi-style so the result is traversal-order independent. Valid
/// pixels are never modified; border-connected regions stay undefined.
RangeImage fill_holes(RangeImage img);

/// 3x3 Gaussian (sigma = 0.5) over defined pixels with edge replication and
/// per-pixel kernel renormalisation over defined taps, then an affine map of
/// the defined values onto [0, 1]. Throws ConstantImage when max == min.
RangeImage smooth_and_normalize(RangeImage img);

/// project + fill_holes + smooth_and_normalize.
RangeImage make_range_image(const PointCloud& cloud, const ProjectionModel& model,
                            double min_range = 0.5, double max_range = 200.0);

/// Reconstructs the 3D point of the nearest raw measurement within a 1-pixel
/// neighbourhood of (u, v), from that pixel's central azimuth/elevation and
/// stored range. Throws NoValidRange when the neighbourhood has no raw return.
Point3 back_project(const RangeImage& img, int u, int v);

/// Debug dump: 16-bit PGM of the normalized channel plus a `<path>.txt`
/// sidecar with the projection model and range limits as key=value lines.
void write_range_image_pgm(const RangeImage& img, const std::string& path);

}  // namespace curvreg
