#pragma once

#include <complex>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "curvreg/grid.hpp"

namespace curvreg {

/// Parameters of the discrete curvelet transform.
struct CurveletConfig {
  int n_scales = 4;            // scale count J, coarsest to finest
  int n_angles_coarse = 16;    // wedge count at the 2nd coarsest scale
  bool finest_is_curvelets = true;  // false: single angle-less band at the finest scale

  /// Throws InvalidConfig unless n_scales >= 2 and n_angles_coarse >= 8 and
  /// divisible by 4.
  void validate() const;

  /// Angle count per scale, coarsest first: [1, c, c, 2c, 2c, ...] — the
  /// count doubles every other scale starting from n_angles_coarse at the
  /// second coarsest. With finest_is_curvelets = false the last entry is 1.
  std::vector<int> angles_per_scale() const;

  friend bool operator==(const CurveletConfig&, const CurveletConfig&) = default;
};

/// Precomputed transform geometry for one image size and configuration:
/// frequency-domain window values per wedge, the injective wrapping index
/// maps, and the FFT plans. Immutable after construction and safe to share
/// across threads.
class FdctPlan {
public:
  FdctPlan(int width, int height, const CurveletConfig& cfg);
  ~FdctPlan();
  FdctPlan(const FdctPlan&) = delete;
  FdctPlan& operator=(const FdctPlan&) = delete;

  int width() const noexcept;
  int height() const noexcept;
  const CurveletConfig& config() const noexcept;
  const std::vector<int>& angle_counts() const noexcept;

  /// (rows, cols) of the wrapped coefficient array for 0-based (scale, angle).
  std::pair<int, int> band_extent(int scale, int angle) const;

  struct Impl;
  const Impl& impl() const noexcept { return *impl_; }

private:
  std::unique_ptr<Impl> impl_;
};

/// Returns a cached plan for the given size and configuration.
std::shared_ptr<const FdctPlan> make_fdct_plan(int width, int height,
                                               const CurveletConfig& cfg);

/// Complex coefficient arrays indexed by (scale j, angle l, position k).
/// bands[0] holds the single angle-less coarsest array.
struct CurveletPyramid {
  std::shared_ptr<const FdctPlan> plan;
  std::vector<std::vector<Grid<std::complex<double>>>> bands;

  int num_scales() const noexcept { return static_cast<int>(bands.size()); }

  /// Sum of |c|^2 over every coefficient. Equals the input image energy for
  /// a pyramid produced by fdct_forward (tight frame).
  double total_energy() const;
};

/// Forward fast discrete curvelet transform via frequency wrapping:
/// FFT -> smooth corona x angular wedge windows -> wrap each wedge onto a
/// rectangle -> inverse FFT per wedge.
///
/// Throws ImageTooSmall unless width and height are both >= 2^(n_scales + 2).
CurveletPyramid fdct_forward(const Grid<double>& image, const CurveletConfig& cfg);
CurveletPyramid fdct_forward(const Grid<double>& image,
                             std::shared_ptr<const FdctPlan> plan);

/// Adjoint (= inverse, the frame is tight) transform back to an image.
/// Throws GeometryMismatch when the pyramid does not match its plan.
Grid<double> fdct_inverse(const CurveletPyramid& pyramid);

/// Inverse transform with every scale except `scale` zeroed. Scale indices
/// are 1-based: 1 = coarsest .. n_scales = finest. Throws ScaleOutOfRange.
Grid<double> reconstruct_scale(const CurveletPyramid& pyramid, int scale);

/// Binary coefficient dump (little-endian): header with dims, scale/angle
/// layout and per-wedge extents, then interleaved re/im doubles per wedge.
void write_coefficients(const CurveletPyramid& pyramid, const std::string& path);
CurveletPyramid read_coefficients(const std::string& path);

/// Log-magnitude mosaic of the coefficients: coarsest scale at the center,
/// concentric coronae of angular panels toward the edges. Values in [0, 1],
/// suitable for a PGM dump.
Grid<double> coefficient_mosaic(const CurveletPyramid& pyramid, int size = 768);

}  // namespace curvreg
