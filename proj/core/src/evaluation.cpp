#include "curvreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"
#include "curvreg/rng.hpp"
#include "curvreg/threading.hpp"

namespace curvreg {

ErrorSample pair_error(const RigidTransform& estimated, const RigidTransform& truth) {
  ErrorSample s;
  s.translation_error = (estimated.translation - truth.translation).norm();
  s.rotation_error = rotation_distance(estimated.rotation, truth.rotation);
  return s;
}

RmseSummary rmse(const std::vector<ErrorSample>& samples) {
  if (samples.empty()) raise(ErrorCode::EmptySamples, "RMSE over zero samples");
  double t_sq = 0.0, r_sq = 0.0;
  for (const ErrorSample& s : samples) {
    t_sq += s.translation_error * s.translation_error;
    r_sq += s.rotation_error * s.rotation_error;
  }
  const double n = static_cast<double>(samples.size());
  return {std::sqrt(t_sq / n), std::sqrt(r_sq / n)};
}

std::vector<std::pair<double, double>> ecdf(const std::vector<double>& samples) {
  if (samples.empty()) raise(ErrorCode::EmptySamples, "ECDF over zero samples");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> steps;
  const double n = static_cast<double>(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i) {
    // Collapse duplicates: the step at a value carries the highest proportion.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    steps.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  steps.back().second = 1.0;  // guard against n/n rounding
  return steps;
}

double failure_rate(const std::vector<double>& samples, double threshold) {
  if (samples.empty()) raise(ErrorCode::EmptySamples, "failure rate over zero samples");
  size_t failures = 0;
  for (const double v : samples)
    if (v > threshold) ++failures;
  return static_cast<double>(failures) / static_cast<double>(samples.size());
}

std::vector<RigidTransform> integrate_trajectory(
    const std::vector<RigidTransform>& pairwise) {
  std::vector<RigidTransform> poses;
  poses.reserve(pairwise.size() + 1);
  poses.push_back(RigidTransform::identity());
  for (const RigidTransform& step : pairwise) {
    RigidTransform next = compose(poses.back(), step);
    next.rotation = orthonormalize(next.rotation);
    poses.push_back(next);
  }
  return poses;
}

namespace {

struct VoxelKey {
  int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (const int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<size_t>(h);
  }
};

}  // namespace

PointCloud accumulate_map(const std::vector<PointCloud>& scans,
                          const std::vector<RigidTransform>& poses,
                          double voxel_size) {
  if (scans.size() != poses.size())
    raise(ErrorCode::LengthMismatch,
          std::to_string(scans.size()) + " scans vs " + std::to_string(poses.size()) +
              " poses");

  PointCloud map;
  std::unordered_map<VoxelKey, char, VoxelKeyHash> occupied;
  for (size_t i = 0; i < scans.size(); ++i) {
    for (const Point3& p : scans[i].points) {
      const Point3 world = apply_transform(poses[i], p);
      if (voxel_size > 0.0) {
        const VoxelKey key{static_cast<int64_t>(std::floor(world.x() / voxel_size)),
                           static_cast<int64_t>(std::floor(world.y() / voxel_size)),
                           static_cast<int64_t>(std::floor(world.z() / voxel_size))};
        if (!occupied.emplace(key, 1).second) continue;  // first point wins
      }
      map.points.push_back(world);
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Terrain
// ---------------------------------------------------------------------------

void TerrainSpec::validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0))
    raise(ErrorCode::InvalidConfig, "terrain extents must be positive");
  if (!(resolution > 0.0))
    raise(ErrorCode::InvalidConfig, "terrain resolution must be positive");
  if (!(noise_scale > 0.0))
    raise(ErrorCode::InvalidConfig, "terrain noise scale must be positive");
  if (range_noise_sigma < 0.0)
    raise(ErrorCode::InvalidConfig, "range noise sigma must be non-negative");
}

namespace {

// Deterministic value noise: pseudo-random lattice values in [-1, 1] blended
// with a smoothstep. Two octaves give gentle undulation plus fine texture.
double lattice_value(uint64_t seed, int64_t ix, int64_t iy) {
  const uint64_t key = (static_cast<uint64_t>(ix) << 32) ^
                       (static_cast<uint64_t>(iy) & 0xffffffffull);
  SplitMix64 rng(mix_seed(seed, key));
  return rng.uniform() * 2.0 - 1.0;
}

double value_noise(uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<int64_t>(fx);
  const auto iy = static_cast<int64_t>(fy);
  double tx = x - fx;
  double ty = y - fy;
  tx = tx * tx * (3.0 - 2.0 * tx);
  ty = ty * ty * (3.0 - 2.0 * ty);
  const double v00 = lattice_value(seed, ix, iy);
  const double v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1);
  const double v11 = lattice_value(seed, ix + 1, iy + 1);
  const double a = v00 + (v10 - v00) * tx;
  const double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

double cos_bump(double d, double radius) {
  // Smooth compactly supported bump: 1 at d = 0, 0 at d >= radius.
  if (d >= radius) return 0.0;
  const double c = std::cos(0.5 * 3.14159265358979323846 * d / radius);
  return c * c;
}

double analytic_height(const TerrainSpec& spec, double x, double y) {
  double h = 0.0;
  if (spec.noise_amplitude != 0.0) {
    h += spec.noise_amplitude *
         value_noise(mix_seed(spec.rng_seed, 1), x / spec.noise_scale,
                     y / spec.noise_scale);
    h += 0.35 * spec.noise_amplitude *
         value_noise(mix_seed(spec.rng_seed, 2), 2.7 * x / spec.noise_scale,
                     2.7 * y / spec.noise_scale);
  }
  for (const Hill& hill : spec.hills)
    h += hill.height * cos_bump(std::hypot(x - hill.x, y - hill.y), hill.radius);
  for (const Crater& crater : spec.craters) {
    const double d = std::hypot(x - crater.x, y - crater.y);
    h -= crater.depth * cos_bump(d, crater.radius);
    const double rim_width = 0.3 * crater.radius;
    if (std::abs(d - crater.radius) < rim_width)
      h += 0.25 * crater.depth * cos_bump(std::abs(d - crater.radius), rim_width);
  }
  return h;
}

}  // namespace

Terrain::Terrain(const TerrainSpec& spec) : spec_(spec) {
  spec.validate();
  const int nx = static_cast<int>(std::ceil(spec.extent_x / spec.resolution)) + 1;
  const int ny = static_cast<int>(std::ceil(spec.extent_y / spec.resolution)) + 1;
  dem_ = Grid<double>(nx, ny);
  min_h_ = std::numeric_limits<double>::infinity();
  max_h_ = -min_h_;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = -0.5 * spec.extent_x + i * spec.resolution;
      const double y = -0.5 * spec.extent_y + j * spec.resolution;
      const double h = analytic_height(spec, x, y);
      dem_.at(i, j) = h;
      min_h_ = std::min(min_h_, h);
      max_h_ = std::max(max_h_, h);
    }
  }
  rock_centers_.reserve(spec.rocks.size());
  for (const Rock& rock : spec.rocks)
    rock_centers_.emplace_back(rock.x, rock.y,
                               height(rock.x, rock.y) + 0.6 * rock.radius);
}

bool Terrain::inside(double x, double y) const {
  return std::abs(x) <= 0.5 * spec_.extent_x && std::abs(y) <= 0.5 * spec_.extent_y;
}

double Terrain::height(double x, double y) const {
  const double gx = (x + 0.5 * spec_.extent_x) / spec_.resolution;
  const double gy = (y + 0.5 * spec_.extent_y) / spec_.resolution;
  int i = static_cast<int>(std::floor(gx));
  int j = static_cast<int>(std::floor(gy));
  i = std::clamp(i, 0, dem_.width() - 2);
  j = std::clamp(j, 0, dem_.height() - 2);
  const double tx = std::clamp(gx - i, 0.0, 1.0);
  const double ty = std::clamp(gy - j, 0.0, 1.0);
  const double a = dem_.at(i, j) + (dem_.at(i + 1, j) - dem_.at(i, j)) * tx;
  const double b = dem_.at(i, j + 1) + (dem_.at(i + 1, j + 1) - dem_.at(i, j + 1)) * tx;
  return a + (b - a) * ty;
}

namespace {

// Clips [t0, t1] against origin + t*dir staying within [lo, hi] on one axis.
bool clip_slab(double origin, double dir, double lo, double hi, double& t0,
               double& t1) {
  if (std::abs(dir) < 1e-15) return origin >= lo && origin <= hi;
  double ta = (lo - origin) / dir;
  double tb = (hi - origin) / dir;
  if (ta > tb) std::swap(ta, tb);
  t0 = std::max(t0, ta);
  t1 = std::min(t1, tb);
  return t0 <= t1;
}

constexpr double kMaxCastRange = 250.0;  // meters, beyond any sensor max range

// Nearest terrain intersection along the ray, or +inf. March at half the DEM
// resolution inside the terrain bounding box, then bisect the sign change.
double cast_terrain(const Terrain& terrain, const Point3& origin, const Point3& dir) {
  const TerrainSpec& spec = terrain.spec();
  double t0 = 1e-6, t1 = kMaxCastRange;
  if (!clip_slab(origin.x(), dir.x(), -0.5 * spec.extent_x, 0.5 * spec.extent_x, t0, t1))
    return std::numeric_limits<double>::infinity();
  if (!clip_slab(origin.y(), dir.y(), -0.5 * spec.extent_y, 0.5 * spec.extent_y, t0, t1))
    return std::numeric_limits<double>::infinity();
  if (!clip_slab(origin.z(), dir.z(), terrain.min_height() - 1.0,
                 terrain.max_height() + 1e-9, t0, t1))
    return std::numeric_limits<double>::infinity();

  auto above = [&](double t) {
    const Point3 p = origin + t * dir;
    return p.z() - terrain.height(p.x(), p.y());
  };

  const double step = 0.5 * spec.resolution;
  double prev_t = t0;
  double prev_f = above(t0);
  if (prev_f <= 0.0) return t0;  // grazing entry
  for (double t = t0 + step; t <= t1 + step; t += step) {
    const double tc = std::min(t, t1);
    const double f = above(tc);
    if (f <= 0.0) {
      double lo = prev_t, hi = tc;
      for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (above(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_t = tc;
    prev_f = f;
    if (tc >= t1) break;
  }
  return std::numeric_limits<double>::infinity();
}

double cast_sphere(const Point3& origin, const Point3& dir, const Point3& center,
                   double radius) {
  const Point3 oc = origin - center;
  const double b = oc.dot(dir);
  const double disc = b * b - (oc.squaredNorm() - radius * radius);
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t > 1e-6 ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

PointCloud synth_scan(const Terrain& terrain, const RigidTransform& sensor_pose,
                      const ProjectionModel& model, uint64_t noise_stream) {
  model.validate();
  const TerrainSpec& spec = terrain.spec();
  const Point3 origin = sensor_pose.translation;
  if (terrain.inside(origin.x(), origin.y()) &&
      origin.z() <= terrain.height(origin.x(), origin.y()))
    raise(ErrorCode::SensorBelowTerrain, "sensor origin is below the surface");

  const int width = model.width();
  const int height = model.height();
  const size_t n_rays = static_cast<size_t>(width) * height;

  std::vector<Point3> hits(n_rays, Point3::Zero());
  std::vector<char> hit_mask(n_rays, 0);

  parallel_for(0, n_rays, [&](size_t ray) {
    const int u = static_cast<int>(ray) % width;
    const int v = static_cast<int>(ray) / width;
    const double az = model.az_start + (u + 0.5) * model.az_res;
    const double el = model.el_start + (v + 0.5) * model.el_res;
    const Point3 dir_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                            std::sin(el));
    const Point3 dir_world = sensor_pose.rotation * dir_sensor;

    double t = cast_terrain(terrain, origin, dir_world);
    for (size_t r = 0; r < spec.rocks.size(); ++r)
      t = std::min(t, cast_sphere(origin, dir_world, terrain.rock_centers()[r],
                                  spec.rocks[r].radius));
    if (!std::isfinite(t) || t > kMaxCastRange) return;

    if (spec.range_noise_sigma > 0.0) {
      SplitMix64 rng(
          mix_seed(mix_seed(spec.rng_seed, 0x5ca1ab1e + noise_stream), ray));
      t += spec.range_noise_sigma * rng.normal();
      if (t <= 1e-6) return;
    }
    hits[ray] = t * dir_sensor;  // sensor-frame point
    hit_mask[ray] = 1;
  });

  PointCloud cloud;
  for (size_t ray = 0; ray < n_rays; ++ray)
    if (hit_mask[ray] != 0) cloud.points.push_back(hits[ray]);
  return cloud;
}

PointCloud synth_scan(const TerrainSpec& spec, const RigidTransform& sensor_pose,
                      const ProjectionModel& model, uint64_t noise_stream) {
  return synth_scan(Terrain(spec), sensor_pose, model, noise_stream);
}

TerrainSpec random_terrain(uint64_t seed) {
  TerrainSpec spec;
  spec.rng_seed = seed;
  spec.extent_x = 44.0;
  spec.extent_y = 44.0;
  spec.resolution = 0.1;
  spec.noise_amplitude = 0.35;
  spec.noise_scale = 7.0;

  SplitMix64 rng(mix_seed(seed, 0xfeedface));
  const int n_hills = 3 + static_cast<int>(rng.bounded(3));
  for (int i = 0; i < n_hills; ++i) {
    Hill h;
    h.x = rng.uniform(-16.0, 16.0);
    h.y = rng.uniform(-16.0, 16.0);
    h.radius = rng.uniform(3.5, 8.0);
    h.height = rng.uniform(0.8, 2.2);
    spec.hills.push_back(h);
  }
  Crater crater;
  crater.x = rng.uniform(-12.0, 12.0);
  crater.y = rng.uniform(-12.0, 12.0);
  crater.radius = rng.uniform(3.0, 6.0);
  crater.depth = rng.uniform(0.6, 1.4);
  spec.craters.push_back(crater);

  // Rock density matches a planetary-analogue gravel yard; rocks are the
  // viewpoint-stable structure a feature detector can anchor to, while the
  // smooth noise field underneath only offers extrema that migrate with the
  // sensor (a surface patch of curvature radius R seen from distance D drifts
  // by about R / (R + D) of the baseline).
  const int n_rocks = 170 + static_cast<int>(rng.bounded(50));
  for (int i = 0; i < n_rocks; ++i) {
    Rock r;
    r.x = rng.uniform(-20.0, 20.0);
    r.y = rng.uniform(-20.0, 20.0);
    r.radius = rng.uniform(0.15, 0.65);
    spec.rocks.push_back(r);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Artifact formats
// ---------------------------------------------------------------------------

std::vector<GroundTruthPose> read_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::vector<GroundTruthPose> poses;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    GroundTruthPose entry;
    double tx, ty, tz, qw, qx, qy, qz;
    if (!(fields >> entry.id >> tx >> ty >> tz >> qw >> qx >> qy >> qz))
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": expected id + 7 pose numbers");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9)
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": zero quaternion");
    q.normalize();
    entry.pose.rotation = q.toRotationMatrix();
    entry.pose.translation = Point3(tx, ty, tz);
    poses.push_back(std::move(entry));
  }
  return poses;
}

void write_pose_file(const std::vector<GroundTruthPose>& poses,
                     const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    char line[256];
    for (const GroundTruthPose& entry : poses) {
      Eigen::Quaterniond q(entry.pose.rotation);
      if (q.w() < 0.0) q.coeffs() *= -1.0;  // canonical sign for reproducible files
      std::snprintf(line, sizeof(line), "%s %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                    entry.id.c_str(), entry.pose.translation.x(),
                    entry.pose.translation.y(), entry.pose.translation.z(), q.w(),
                    q.x(), q.y(), q.z());
      out << line;
    }
  });
}

void write_ecdf_csv(const std::vector<std::pair<double, double>>& steps,
                    const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "threshold,proportion\n";
    char line[80];
    for (const auto& [threshold, proportion] : steps) {
      std::snprintf(line, sizeof(line), "%.17g,%.17g\n", threshold, proportion);
      out << line;
    }
  });
}

void write_rmse_csv(const RmseSummary& summary, double rotation_failure_rate,
                    size_t sample_count, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "metric,value\n";
    char line[96];
    std::snprintf(line, sizeof(line), "rmse_translation_m,%.17g\n", summary.translation);
    out << line;
    std::snprintf(line, sizeof(line), "rmse_rotation_rad,%.17g\n", summary.rotation);
    out << line;
    std::snprintf(line, sizeof(line), "rotation_failure_rate,%.17g\n",
                  rotation_failure_rate);
    out << line;
    std::snprintf(line, sizeof(line), "pairs,%zu\n", sample_count);
    out << line;
  });
}

}  // namespace curvreg
