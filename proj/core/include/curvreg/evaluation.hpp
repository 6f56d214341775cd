#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvreg/geometry.hpp"
#include "curvreg/grid.hpp"
#include "curvreg/range_image.hpp"

namespace curvreg {

struct GroundTruthPose {
  std::string id;
  RigidTransform pose;  // scan frame -> global frame
};

struct ErrorSample {
  std::string pair_id;
  double translation_error = 0.0;  // meters
  double rotation_error = 0.0;     // radians
};

/// Translation error = ||t_est - t_true||, rotation error = geodesic angle
/// of R_est * R_true^T. The pair id is left empty for the caller.
ErrorSample pair_error(const RigidTransform& estimated, const RigidTransform& truth);

/// Per-channel RMSE. Throws EmptySamples.
struct RmseSummary {
  double translation = 0.0;  // meters
  double rotation = 0.0;     // radians
};
RmseSummary rmse(const std::vector<ErrorSample>& samples);

/// Empirical CDF steps: one (value, proportion) point per distinct sorted
/// sample value; the last proportion is exactly 1.0. Throws EmptySamples.
std::vector<std::pair<double, double>> ecdf(const std::vector<double>& samples);

/// Fraction of samples strictly greater than the threshold (e.g. the 0.1 rad
/// rotation failure convention).
double failure_rate(const std::vector<double>& samples, double threshold);

/// pose_0 = identity, pose_i = pose_{i-1} * transform_i, re-orthonormalized
/// each step. Returns transforms.size() + 1 poses.
std::vector<RigidTransform> integrate_trajectory(
    const std::vector<RigidTransform>& pairwise);

/// Union of the scans mapped through their poses. voxel_size > 0 decimates:
/// first point per occupied voxel wins, in scan-then-point order.
/// Throws LengthMismatch.
PointCloud accumulate_map(const std::vector<PointCloud>& scans,
                          const std::vector<RigidTransform>& poses,
                          double voxel_size = 0.1);

// ---------------------------------------------------------------------------
// Synthetic terrain scanner
// ---------------------------------------------------------------------------

struct Hill {
  double x = 0.0, y = 0.0;  // meters
  double radius = 5.0;
  double height = 1.0;
};

struct Crater {
  double x = 0.0, y = 0.0;
  double radius = 4.0;
  double depth = 1.0;
};

/// Sphere resting on the terrain (center 0.6 radius above the surface),
/// intersected analytically so hit ranges are exact.
struct Rock {
  double x = 0.0, y = 0.0;
  double radius = 0.3;
};

struct TerrainSpec {
  double extent_x = 40.0;     // meters, centred on the origin
  double extent_y = 40.0;
  double resolution = 0.1;    // meters per DEM cell
  std::vector<Hill> hills;
  std::vector<Crater> craters;
  std::vector<Rock> rocks;
  double noise_amplitude = 0.3;  // value-noise heightfield amplitude, meters
  double noise_scale = 6.0;      // value-noise feature wavelength, meters
  double range_noise_sigma = 0.0;  // additive per-ray range noise, meters
  uint64_t rng_seed = 0;

  void validate() const;  // InvalidConfig on non-positive extents/resolution
};

/// Heightfield sampled from the spec: value noise plus hill/crater profiles
/// on a regular grid, queried by bilinear interpolation.
class Terrain {
public:
  explicit Terrain(const TerrainSpec& spec);

  const TerrainSpec& spec() const noexcept { return spec_; }
  /// Bilinear surface height; (x, y) clamped to the extent.
  double height(double x, double y) const;
  bool inside(double x, double y) const;
  double min_height() const noexcept { return min_h_; }
  double max_height() const noexcept { return max_h_; }
  /// Resolved rock centers, aligned with spec().rocks.
  const std::vector<Point3>& rock_centers() const noexcept { return rock_centers_; }

private:
  TerrainSpec spec_;
  Grid<double> dem_;
  double min_h_ = 0.0, max_h_ = 0.0;
  std::vector<Point3> rock_centers_;
};

/// Ray-casts one scan from the sensor pose (sensor frame -> world): every
/// pixel ray of the projection model is marched against the heightfield and
/// intersected exactly with the rock spheres; the nearest hit wins. Returned
/// points are in the sensor frame, with N(0, sigma^2) range noise applied
/// along the ray, seeded per (spec seed, noise_stream, ray index) so scans
/// sharing one terrain can carry independent noise.
/// Throws SensorBelowTerrain when the sensor origin is under the surface.
PointCloud synth_scan(const Terrain& terrain, const RigidTransform& sensor_pose,
                      const ProjectionModel& model, uint64_t noise_stream = 0);
PointCloud synth_scan(const TerrainSpec& spec, const RigidTransform& sensor_pose,
                      const ProjectionModel& model, uint64_t noise_stream = 0);

/// Randomized feature-rich terrain (hills, a crater, scattered rocks) for the
/// synthetic evaluation suite; deterministic per seed.
TerrainSpec random_terrain(uint64_t seed);

// ---------------------------------------------------------------------------
// Artifact formats
// ---------------------------------------------------------------------------

/// Pose files: one `id tx ty tz qw qx qy qz` line per pose (unit quaternion).
std::vector<GroundTruthPose> read_pose_file(const std::string& path);
void write_pose_file(const std::vector<GroundTruthPose>& poses,
                     const std::string& path);

/// CSV `threshold,proportion` with one row per ECDF step.
void write_ecdf_csv(const std::vector<std::pair<double, double>>& steps,
                    const std::string& path);

/// CSV `metric,value` summary: RMSE channels, failure rate, sample count.
void write_rmse_csv(const RmseSummary& summary, double rotation_failure_rate,
                    size_t sample_count, const std::string& path);

}  // namespace curvreg
