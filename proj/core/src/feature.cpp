#include "curvreg/feature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numbers>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"
#include "curvreg/threading.hpp"

namespace curvreg {

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

DocStack build_doc_stack(const CurveletPyramid& pyramid) {
  const int n_scales = pyramid.num_scales();
  if (n_scales < 3)
    raise(ErrorCode::TooFewScales,
          "difference-of-curvelets needs >= 3 scales, got " + std::to_string(n_scales));

  // Level k is the difference between the reconstructions from scales 1..k+2
  // and 1..k+1. By linearity of the inverse transform that subtraction
  // collapses to the band image of scale k+2 alone, so the DC-carrying
  // coarsest scale cancels out of every level and the stack sums (together
  // with the coarsest band) back to the full reconstruction.
  DocStack stack;
  stack.levels.resize(static_cast<size_t>(n_scales) - 1);
  parallel_for(0, stack.levels.size(), [&](size_t k) {
    stack.levels[k] = reconstruct_scale(pyramid, static_cast<int>(k) + 2);
  });
  return stack;
}

std::vector<Keypoint> detect_extrema(const DocStack& stack) {
  const int n_levels = stack.num_levels();
  if (n_levels < 3)
    raise(ErrorCode::TooFewScales,
          "extrema detection needs >= 3 stack levels, got " + std::to_string(n_levels));
  const int width = stack.levels[0].width();
  const int height = stack.levels[0].height();
  for (const auto& level : stack.levels)
    if (level.width() != width || level.height() != height)
      raise(ErrorCode::GeometryMismatch, "stack levels differ in size");

  std::vector<Keypoint> found;
  for (int level = 1; level + 1 < n_levels; ++level) {
    const Grid<double>& below = stack.levels[static_cast<size_t>(level) - 1];
    const Grid<double>& here = stack.levels[static_cast<size_t>(level)];
    const Grid<double>& above = stack.levels[static_cast<size_t>(level) + 1];
    for (int v = 1; v + 1 < height; ++v) {
      for (int u = 1; u + 1 < width; ++u) {
        const double value = here.at(u, v);
        bool is_max = true, is_min = true;
        for (int dv = -1; dv <= 1 && (is_max || is_min); ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = u + du, nv = v + dv;
            const double b = below.at(nu, nv);
            const double a = above.at(nu, nv);
            is_max = is_max && value > b && value > a;
            is_min = is_min && value < b && value < a;
            if (du != 0 || dv != 0) {
              const double h = here.at(nu, nv);
              is_max = is_max && value > h;
              is_min = is_min && value < h;
            }
            if (!is_max && !is_min) break;
          }
        }
        if (is_max || is_min) found.push_back({u, v, level, value, Point3::Zero()});
      }
    }
  }
  // Loop order already yields (level, v, u) ascending; keep the contract explicit.
  std::sort(found.begin(), found.end(), [](const Keypoint& a, const Keypoint& b) {
    return std::tie(a.doc_level, a.v, a.u) < std::tie(b.doc_level, b.v, b.u);
  });
  return found;
}

std::vector<Keypoint> filter_keypoints(const std::vector<Keypoint>& keypoints,
                                       const RangeImage& img,
                                       double contrast_threshold,
                                       double range_margin) {
  std::vector<Keypoint> kept;
  kept.reserve(keypoints.size());
  for (Keypoint kp : keypoints) {
    if (std::abs(kp.response) < contrast_threshold) continue;
    try {
      kp.world = back_project(img, kp.u, kp.v);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoValidRange) continue;
      throw;
    }
    if (kp.world.norm() < img.min_range + range_margin) continue;
    kept.push_back(kp);
  }
  return kept;
}

Descriptor compute_descriptor(const Grid<double>& normalized, const Keypoint& kp) {
  constexpr int kWindow = 16;          // pixels per side
  constexpr int kCells = 4;            // spatial cells per side
  constexpr int kOrientations = 8;
  constexpr double kSigma = 8.0;
  constexpr double kClamp = 0.2;
  const double two_pi = 2.0 * std::numbers::pi;

  if (normalized.empty())
    raise(ErrorCode::GeometryMismatch, "descriptor needs a normalized image");

  double hist[kCells][kCells][kOrientations] = {};
  double gradient_energy = 0.0;

  for (int dv = -kWindow / 2; dv < kWindow / 2; ++dv) {
    for (int du = -kWindow / 2; du < kWindow / 2; ++du) {
      const int x = kp.u + du;
      const int y = kp.v + dv;
      const double gx =
          0.5 * (normalized.at_clamped(x + 1, y) - normalized.at_clamped(x - 1, y));
      const double gy =
          0.5 * (normalized.at_clamped(x, y + 1) - normalized.at_clamped(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      gradient_energy += mag;

      // Sample position relative to the window centre, which sits between
      // pixels: offsets run over [-7.5, 7.5].
      const double ox = du + 0.5;
      const double oy = dv + 0.5;
      const double weight = std::exp(-(ox * ox + oy * oy) / (2.0 * kSigma * kSigma));

      const double cx = (ox + kWindow / 2.0) / (kWindow / kCells) - 0.5;  // [-0.5, 3.5]
      const double cy = (oy + kWindow / 2.0) / (kWindow / kCells) - 0.5;
      const int cx0 = static_cast<int>(std::floor(cx));
      const int cy0 = static_cast<int>(std::floor(cy));
      const double fx = cx - cx0;
      const double fy = cy - cy0;

      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += two_pi;
      const double ob = theta / (two_pi / kOrientations);  // [0, 8)
      int ob0 = static_cast<int>(ob);
      if (ob0 >= kOrientations) ob0 = kOrientations - 1;
      const double fo = ob - ob0;

      const double contribution = mag * weight;
      for (int iy = 0; iy <= 1; ++iy) {
        const int cell_y = cy0 + iy;
        if (cell_y < 0 || cell_y >= kCells) continue;
        const double wy = iy == 0 ? 1.0 - fy : fy;
        for (int ix = 0; ix <= 1; ++ix) {
          const int cell_x = cx0 + ix;
          if (cell_x < 0 || cell_x >= kCells) continue;
          const double wx = ix == 0 ? 1.0 - fx : fx;
          for (int io = 0; io <= 1; ++io) {
            const int bin = (ob0 + io) % kOrientations;
            const double wo = io == 0 ? 1.0 - fo : fo;
            hist[cell_y][cell_x][bin] += contribution * wy * wx * wo;
          }
        }
      }
    }
  }

  if (gradient_energy == 0.0)
    raise(ErrorCode::ZeroGradient,
          "descriptor window at (" + std::to_string(kp.u) + ", " +
              std::to_string(kp.v) + ") has no gradients");

  Descriptor desc{};
  size_t i = 0;
  for (int cy = 0; cy < kCells; ++cy)
    for (int cx = 0; cx < kCells; ++cx)
      for (int ob = 0; ob < kOrientations; ++ob) desc[i++] = hist[cy][cx][ob];

  auto l2_normalize = [](Descriptor& d) {
    double sum = 0.0;
    for (const double v : d) sum += v * v;
    const double norm = std::sqrt(sum);
    for (double& v : d) v /= norm;
  };
  l2_normalize(desc);
  for (double& v : desc) v = std::min(v, kClamp);
  l2_normalize(desc);
  return desc;
}

namespace {

// Range gap treated as a depth discontinuity rather than surface slope.
constexpr double kEdgeJump = 0.5;  // meters

// Fractional offset of a parabola through three samples, clamped to half a
// pixel; 0 when the samples are too flat to localize.
double parabola_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (std::abs(denom) < 1e-18) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Replaces the pixel-center world point with one back-projected at the
// sub-pixel extremum of the stack level. Pixel quantization otherwise leaves
// a tangential bias of up to res * range / 2 on every correspondence, and a
// global fractional image shift pushes all of them the same way, so the bias
// survives the least-squares alignment instead of averaging out.
void refine_world(const RangeImage& img, const Grid<double>& level, Keypoint& kp) {
  // Classify the anchor before refining it: a range jump or a no-return pixel
  // in the 3x3 neighbourhood marks a silhouette point whose world position
  // depends on the viewpoint.
  double patch_lo = std::numeric_limits<double>::infinity(), patch_hi = -patch_lo;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int nu = kp.u + dx, nv = kp.v + dy;
      if (!img.filled_range.contains(nu, nv) || img.defined_mask.at(nu, nv) == 0) {
        kp.on_depth_edge = true;
        continue;
      }
      patch_lo = std::min(patch_lo, img.filled_range.at(nu, nv));
      patch_hi = std::max(patch_hi, img.filled_range.at(nu, nv));
    }
  if (patch_hi - patch_lo > kEdgeJump) kp.on_depth_edge = true;

  const double du =
      parabola_offset(level.at(kp.u - 1, kp.v), level.at(kp.u, kp.v),
                      level.at(kp.u + 1, kp.v));
  const double dv =
      parabola_offset(level.at(kp.u, kp.v - 1), level.at(kp.u, kp.v),
                      level.at(kp.u, kp.v + 1));

  const double uc = kp.u + du;
  const double vc = kp.v + dv;
  const int u0 = static_cast<int>(std::floor(uc));
  const int v0 = static_cast<int>(std::floor(vc));
  if (u0 < 0 || u0 + 1 >= img.filled_range.width() || v0 < 0 ||
      v0 + 1 >= img.filled_range.height())
    return;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      if (img.defined_mask.at(u0 + dx, v0 + dy) == 0) return;
      const double r = img.filled_range.at(u0 + dx, v0 + dy);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }

  double r;
  if (hi - lo <= kEdgeJump) {
    const double fu = uc - u0;
    const double fv = vc - v0;
    r = (1.0 - fv) * ((1.0 - fu) * img.filled_range.at(u0, v0) +
                      fu * img.filled_range.at(u0 + 1, v0)) +
        fv * ((1.0 - fu) * img.filled_range.at(u0, v0 + 1) +
              fu * img.filled_range.at(u0 + 1, v0 + 1));
  } else {
    // Depth discontinuity under the extremum. Interpolating across the jump
    // would put the point in mid-air, and picking whichever side the pixel
    // centre happens to fall on flips between the two scans. The nearest
    // surface in the 3x3 patch is the one both viewpoints agree on.
    r = lo;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nu = kp.u + dx, nv = kp.v + dy;
        if (!img.filled_range.contains(nu, nv)) continue;
        if (img.defined_mask.at(nu, nv) == 0) continue;
        r = std::min(r, img.filled_range.at(nu, nv));
      }
  }
  const double az = img.model.az_start + (uc + 0.5) * img.model.az_res;
  const double el = img.model.el_start + (vc + 0.5) * img.model.el_res;
  kp.world = Point3(r * std::cos(el) * std::cos(az), r * std::cos(el) * std::sin(az),
                    r * std::sin(el));
}

}  // namespace

FeatureSet extract_features(const RangeImage& img, const CurveletPyramid& pyramid,
                            const FeatureConfig& cfg) {
  const DocStack stack = build_doc_stack(pyramid);
  const std::vector<Keypoint> raw = detect_extrema(stack);
  std::vector<Keypoint> filtered =
      filter_keypoints(raw, img, cfg.contrast_threshold, cfg.range_margin);
  for (Keypoint& kp : filtered)
    refine_world(img, stack.levels[static_cast<size_t>(kp.doc_level)], kp);

  // Per-keypoint description in parallel into fixed slots; keypoints whose
  // window carries no gradient are compacted out afterwards, preserving order.
  std::vector<Descriptor> slots(filtered.size());
  std::vector<char> ok(filtered.size(), 0);
  parallel_for(0, filtered.size(), [&](size_t i) {
    try {
      slots[i] = compute_descriptor(img.normalized, filtered[i]);
      ok[i] = 1;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroGradient) throw;
    }
  });

  FeatureSet out;
  for (size_t i = 0; i < filtered.size(); ++i) {
    if (ok[i] == 0) continue;
    out.keypoints.push_back(filtered[i]);
    out.descriptors.push_back(slots[i]);
  }
  return out;
}

void write_keypoints_csv(const FeatureSet& features, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "u,v,level,response,x,y,z\n";
    char line[256];
    for (const Keypoint& kp : features.keypoints) {
      std::snprintf(line, sizeof(line), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n", kp.u,
                    kp.v, kp.doc_level, kp.response, kp.world.x(), kp.world.y(),
                    kp.world.z());
      out << line;
    }
  });
}

void write_descriptors_f32(const FeatureSet& features, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const Descriptor& desc : features.descriptors) {
      float record[128];
      for (size_t i = 0; i < desc.size(); ++i) record[i] = static_cast<float>(desc[i]);
      out.write(reinterpret_cast<const char*>(record), sizeof(record));
    }
  });
}

}  // namespace curvreg
