#include "curvreg/range_image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <vector>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"

namespace curvreg {

int ProjectionModel::width() const {
  return static_cast<int>(std::ceil((az_end - az_start) / az_res));
}

int ProjectionModel::height() const {
  return static_cast<int>(std::ceil((el_end - el_start) / el_res));
}

void ProjectionModel::validate() const {
  if (!(az_res > 0.0) || !(el_res > 0.0))
    raise(ErrorCode::InvalidConfig, "projection resolutions must be positive");
  if (!(az_end > az_start) || !(el_end > el_start))
    raise(ErrorCode::InvalidConfig, "projection spans must be non-degenerate");
  if (width() <= 0 || height() <= 0)
    raise(ErrorCode::InvalidConfig, "projection yields an empty image");
}

RangeImage project(const PointCloud& cloud, const ProjectionModel& model,
                   double min_range, double max_range) {
  model.validate();
  if (cloud.points.empty()) raise(ErrorCode::EmptyCloud, "cannot project an empty cloud");
  if (!(min_range >= 0.0) || !(max_range > min_range))
    raise(ErrorCode::InvalidConfig, "range limits must satisfy 0 <= min < max");

  const int width = model.width();
  const int height = model.height();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RangeImage img;
  img.model = model;
  img.min_range = min_range;
  img.max_range = max_range;
  img.raw_range = Grid<double>(width, height, nan);
  img.valid_mask = Grid<unsigned char>(width, height, 0);

  size_t hits = 0;
  for (const Point3& p : cloud.points) {
    const double r = p.norm();
    if (!std::isfinite(r) || r < min_range || r > max_range) continue;
    const double az = std::atan2(p.y(), p.x());
    const double el = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    const int u = static_cast<int>(std::floor((az - model.az_start) / model.az_res));
    const int v = static_cast<int>(std::floor((el - model.el_start) / model.el_res));
    if (!img.raw_range.contains(u, v)) continue;
    double& cell = img.raw_range.at(u, v);
    if (img.valid_mask.at(u, v) == 0 || r < cell) cell = r;  // nearest surface wins
    img.valid_mask.at(u, v) = 1;
    ++hits;
  }
  if (hits == 0)
    raise(ErrorCode::EmptyProjection, "no point falls inside the projection model");

  img.filled_range = img.raw_range;
  img.defined_mask = img.valid_mask;
  return img;
}

RangeImage fill_holes(RangeImage img) {
  const int width = img.raw_range.width();
  const int height = img.raw_range.height();
  if (width == 0 || height == 0)
    raise(ErrorCode::GeometryMismatch, "fill_holes needs a projected image");

  // Classify invalid pixels: 4-connected flood fill from every border
  // invalid pixel; what remains unreached is an enclosed hole.
  Grid<unsigned char> border_connected(width, height, 0);
  std::deque<std::pair<int, int>> queue;
  auto enqueue = [&](int u, int v) {
    if (!img.raw_range.contains(u, v)) return;
    if (img.valid_mask.at(u, v) != 0 || border_connected.at(u, v) != 0) return;
    border_connected.at(u, v) = 1;
    queue.emplace_back(u, v);
  };
  for (int u = 0; u < width; ++u) {
    enqueue(u, 0);
    enqueue(u, height - 1);
  }
  for (int v = 0; v < height; ++v) {
    enqueue(0, v);
    enqueue(width - 1, v);
  }
  while (!queue.empty()) {
    const auto [u, v] = queue.front();
    queue.pop_front();
    enqueue(u - 1, v);
    enqueue(u + 1, v);
    enqueue(u, v - 1);
    enqueue(u, v + 1);
  }

  std::vector<std::pair<int, int>> hole;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      if (img.valid_mask.at(u, v) == 0 && border_connected.at(u, v) == 0)
        hole.emplace_back(u, v);

  img.filled_range = img.raw_range;
  img.defined_mask = img.valid_mask;

  // Jacobi dilation: every round assigns all uncovered hole pixels that have
  // a covered 8-neighbour the mean of those neighbours, then commits.
  std::vector<std::pair<int, int>> pending = hole;
  while (!pending.empty()) {
    std::vector<std::pair<int, int>> next;
    std::vector<std::pair<std::pair<int, int>, double>> updates;
    for (const auto& [u, v] : pending) {
      double sum = 0.0;
      int count = 0;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          if (du == 0 && dv == 0) continue;
          const int nu = u + du, nv = v + dv;
          if (!img.defined_mask.contains(nu, nv)) continue;
          if (img.defined_mask.at(nu, nv) == 0) continue;
          sum += img.filled_range.at(nu, nv);
          ++count;
        }
      }
      if (count > 0)
        updates.push_back({{u, v}, sum / count});
      else
        next.push_back({u, v});
    }
    if (updates.empty()) break;  // cannot happen for enclosed holes; safety stop
    for (const auto& [uv, value] : updates) {
      img.filled_range.at(uv.first, uv.second) = value;
      img.defined_mask.at(uv.first, uv.second) = 1;
    }
    pending = std::move(next);
  }
  return img;
}

RangeImage smooth_and_normalize(RangeImage img) {
  const int width = img.filled_range.width();
  const int height = img.filled_range.height();
  if (width == 0 || height == 0)
    raise(ErrorCode::GeometryMismatch, "smooth_and_normalize needs a projected image");

  // 3x3 Gaussian, sigma 0.5: weights exp(-(du^2 + dv^2) / (2 sigma^2)),
  // renormalised per pixel over the defined taps (all nine in the interior
  // of a fully defined image).
  constexpr double kSigma = 0.5;
  double kernel[3][3];
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du)
      kernel[dv + 1][du + 1] = std::exp(-(du * du + dv * dv) / (2.0 * kSigma * kSigma));

  Grid<double> smoothed(width, height, 0.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (img.defined_mask.at(u, v) == 0) continue;
      double sum = 0.0, weight = 0.0;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          // Edge replication: clamp the tap, then require it to be defined.
          const int cu = std::clamp(u + du, 0, width - 1);
          const int cv = std::clamp(v + dv, 0, height - 1);
          if (img.defined_mask.at(cu, cv) == 0) continue;
          const double w = kernel[dv + 1][du + 1];
          sum += w * img.filled_range.at(cu, cv);
          weight += w;
        }
      }
      const double value = sum / weight;  // weight > 0: the pixel itself is defined
      smoothed.at(u, v) = value;
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
  }
  if (!(hi > lo))
    raise(ErrorCode::ConstantImage, "smoothed range image is constant");

  img.normalized = Grid<double>(width, height, 0.0);
  const double scale = 1.0 / (hi - lo);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      if (img.defined_mask.at(u, v) != 0)
        img.normalized.at(u, v) = (smoothed.at(u, v) - lo) * scale;
  return img;
}

RangeImage make_range_image(const PointCloud& cloud, const ProjectionModel& model,
                            double min_range, double max_range) {
  return smooth_and_normalize(fill_holes(project(cloud, model, min_range, max_range)));
}

Point3 back_project(const RangeImage& img, int u, int v) {
  if (!img.raw_range.contains(u, v))
    raise(ErrorCode::NoValidRange, "pixel outside the range image");
  // Neighbourhood scan in increasing distance; first hit wins so ties break
  // deterministically in this fixed order.
  static constexpr int kOffsets[9][2] = {{0, 0},  {0, -1}, {-1, 0}, {1, 0}, {0, 1},
                                         {-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  for (const auto& off : kOffsets) {
    const int nu = u + off[0], nv = v + off[1];
    if (!img.raw_range.contains(nu, nv)) continue;
    if (img.valid_mask.at(nu, nv) == 0) continue;
    const double r = img.raw_range.at(nu, nv);
    const double az = img.model.az_start + (nu + 0.5) * img.model.az_res;
    const double el = img.model.el_start + (nv + 0.5) * img.model.el_res;
    return Point3(r * std::cos(el) * std::cos(az), r * std::cos(el) * std::sin(az),
                  r * std::sin(el));
  }
  raise(ErrorCode::NoValidRange,
        "no raw return within one pixel of (" + std::to_string(u) + ", " +
            std::to_string(v) + ")");
}

void write_range_image_pgm(const RangeImage& img, const std::string& path) {
  if (img.normalized.empty())
    raise(ErrorCode::IoError, "range image has no normalized channel to dump");
  write_pgm16(img.normalized, path);

  const double deg = 180.0 / ProjectionModel::kPi;
  atomic_write(path + ".txt", [&](std::ostream& out) {
    char line[128];
    auto emit = [&](const char* key, double value) {
      std::snprintf(line, sizeof(line), "%s=%.10g\n", key, value);
      out << line;
    };
    emit("az_res_deg", img.model.az_res * deg);
    emit("el_res_deg", img.model.el_res * deg);
    emit("range_min_m", img.min_range);
    emit("range_max_m", img.max_range);
    emit("az_start_deg", img.model.az_start * deg);
    emit("az_end_deg", img.model.az_end * deg);
    emit("el_start_deg", img.model.el_start * deg);
    emit("el_end_deg", img.model.el_end * deg);
  });
}

}  // namespace curvreg
