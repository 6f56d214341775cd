#include "curvreg/curvelet.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "curvreg/error.hpp"
#include "curvreg/io_util.hpp"
#include "curvreg/threading.hpp"

namespace curvreg {

namespace {

// ---------------------------------------------------------------------------
// Smooth window pair. wl rises 0 -> 1 and wr falls 1 -> 0 over [0, 1] with
// wl(x)^2 + wr(x)^2 = 1 everywhere, so squared windows crossfade exactly.
// ---------------------------------------------------------------------------

double bump_falling(double x) {
  // C-infinity, 1 at x <= 0, 0 at x >= 1.
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - std::exp(1.0 - 1.0 / x)));
}

void window_pair(double x, double& wl, double& wr) {
  if (x <= 0.0) {
    wl = 0.0;
    wr = 1.0;
    return;
  }
  if (x >= 1.0) {
    wl = 1.0;
    wr = 0.0;
    return;
  }
  const double fall = bump_falling(x);
  const double rise = bump_falling(1.0 - x);
  const double norm = std::sqrt(fall * fall + rise * rise);
  wl = rise / norm;
  wr = fall / norm;
}

// Squared radial lowpass for dyadic boundary b (0-based): equals 1 for
// rho <= 2^(b - J + 1) / 2 and 0 for rho >= 2^(b - J + 1), with a smooth
// transition between. Differences of consecutive lowpasses telescope to 1.
double sq_lowpass(int b, int n_scales, double rho) {
  const double hi = std::ldexp(1.0, b + 1 - n_scales);
  const double lo = 0.5 * hi;
  if (rho <= lo) return 1.0;
  if (rho >= hi) return 0.0;
  double wl = 0.0, wr = 0.0;
  window_pair((rho - lo) / (hi - lo), wl, wr);
  return wr * wr;
}

double radial_window(int scale, int n_scales, double rho) {
  double sq = 0.0;
  if (scale == 0) {
    sq = sq_lowpass(0, n_scales, rho);
  } else if (scale == n_scales - 1) {
    sq = 1.0 - sq_lowpass(n_scales - 2, n_scales, rho);
  } else {
    sq = sq_lowpass(scale, n_scales, rho) - sq_lowpass(scale - 1, n_scales, rho);
  }
  return std::sqrt(std::max(0.0, sq));
}

// ---------------------------------------------------------------------------
// FFTW plumbing. Planning is not thread safe; execution through the
// new-array interface is.
// ---------------------------------------------------------------------------

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  fftw_complex* ptr = nullptr;

  explicit FftwBuffer(size_t n) : ptr(fftw_alloc_complex(n > 0 ? n : 1)) {
    if (ptr == nullptr) throw std::bad_alloc();
    std::memset(ptr, 0, sizeof(fftw_complex) * (n > 0 ? n : 1));
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  std::complex<double>* cplx() {
    return reinterpret_cast<std::complex<double>*>(ptr);
  }
};

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

PlanPair make_plan_pair(int rows, int cols) {
  FftwBuffer in(static_cast<size_t>(rows) * cols);
  FftwBuffer out(static_cast<size_t>(rows) * cols);
  std::lock_guard<std::mutex> lock(fftw_mutex());
  PlanPair p;
  p.fwd = fftw_plan_dft_2d(rows, cols, in.ptr, out.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
  p.bwd = fftw_plan_dft_2d(rows, cols, in.ptr, out.ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (p.fwd == nullptr || p.bwd == nullptr)
    raise(ErrorCode::IoError, "FFT planner failed");
  return p;
}

void run_fft(fftw_plan plan, FftwBuffer& in, FftwBuffer& out) {
  fftw_execute_dft(plan, in.ptr, out.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Plan construction
// ---------------------------------------------------------------------------

void CurveletConfig::validate() const {
  if (n_scales < 2)
    raise(ErrorCode::InvalidConfig, "curvelet n_scales must be >= 2");
  if (n_angles_coarse < 8 || n_angles_coarse % 4 != 0)
    raise(ErrorCode::InvalidConfig,
          "curvelet n_angles_coarse must be >= 8 and divisible by 4");
}

std::vector<int> CurveletConfig::angles_per_scale() const {
  validate();
  std::vector<int> counts(static_cast<size_t>(n_scales), 1);
  for (int j = 1; j < n_scales; ++j)
    counts[static_cast<size_t>(j)] = n_angles_coarse * (1 << (j / 2));
  if (!finest_is_curvelets) counts.back() = 1;
  return counts;
}

namespace {

struct Wedge {
  int rows = 0;
  int cols = 0;
  std::vector<int> src;      // bin index into the full H x W spectrum
  std::vector<int> dst;      // index into the rows x cols wrapped array
  std::vector<double> win;   // window weight, shared by analysis and adjoint
};

// Scratch support list before the wrapping layout is chosen.
struct WedgeDraft {
  std::vector<int> q1, q2;   // centred integer frequencies
  std::vector<double> win;
};

}  // namespace

struct FdctPlan::Impl {
  int width = 0;
  int height = 0;
  CurveletConfig cfg;
  std::vector<int> nangles;
  std::vector<std::vector<Wedge>> wedges;

  PlanPair full;
  std::map<std::pair<int, int>, PlanPair> wedge_plans;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (full.fwd != nullptr) fftw_destroy_plan(full.fwd);
    if (full.bwd != nullptr) fftw_destroy_plan(full.bwd);
    for (auto& [dims, p] : wedge_plans) {
      if (p.fwd != nullptr) fftw_destroy_plan(p.fwd);
      if (p.bwd != nullptr) fftw_destroy_plan(p.bwd);
    }
  }

  const PlanPair& plans_for(int rows, int cols) const {
    auto it = wedge_plans.find({rows, cols});
    if (it == wedge_plans.end())
      throw std::logic_error("missing FFT plan for wedge size");
    return it->second;
  }
};

namespace {

// Chooses the smaller of the two injective wrapping layouts: keep rows and
// wrap columns modulo the widest per-row span, or the transpose of that.
Wedge wrap_wedge(const WedgeDraft& draft, int height, int width) {
  Wedge w;
  const size_t n = draft.q1.size();
  if (n == 0) return w;

  int min1 = draft.q1[0], max1 = draft.q1[0];
  int min2 = draft.q2[0], max2 = draft.q2[0];
  for (size_t k = 1; k < n; ++k) {
    min1 = std::min(min1, draft.q1[k]);
    max1 = std::max(max1, draft.q1[k]);
    min2 = std::min(min2, draft.q2[k]);
    max2 = std::max(max2, draft.q2[k]);
  }
  const int ext1 = max1 - min1 + 1;
  const int ext2 = max2 - min2 + 1;

  std::vector<int> row_lo(static_cast<size_t>(ext1), width + 1);
  std::vector<int> row_hi(static_cast<size_t>(ext1), -width - 1);
  std::vector<int> col_lo(static_cast<size_t>(ext2), height + 1);
  std::vector<int> col_hi(static_cast<size_t>(ext2), -height - 1);
  for (size_t k = 0; k < n; ++k) {
    const size_t r = static_cast<size_t>(draft.q1[k] - min1);
    const size_t c = static_cast<size_t>(draft.q2[k] - min2);
    row_lo[r] = std::min(row_lo[r], draft.q2[k]);
    row_hi[r] = std::max(row_hi[r], draft.q2[k]);
    col_lo[c] = std::min(col_lo[c], draft.q1[k]);
    col_hi[c] = std::max(col_hi[c], draft.q1[k]);
  }
  int span_a = 1;
  for (size_t r = 0; r < row_lo.size(); ++r)
    if (row_hi[r] >= row_lo[r]) span_a = std::max(span_a, row_hi[r] - row_lo[r] + 1);
  int span_b = 1;
  for (size_t c = 0; c < col_lo.size(); ++c)
    if (col_hi[c] >= col_lo[c]) span_b = std::max(span_b, col_hi[c] - col_lo[c] + 1);

  const long area_a = static_cast<long>(ext1) * span_a;
  const long area_b = static_cast<long>(span_b) * ext2;
  const bool use_a = area_a <= area_b;
  w.rows = use_a ? ext1 : span_b;
  w.cols = use_a ? span_a : ext2;

  w.src.reserve(n);
  w.dst.reserve(n);
  w.win = draft.win;
  std::vector<char> occupied(static_cast<size_t>(w.rows) * w.cols, 0);
  for (size_t k = 0; k < n; ++k) {
    const int b1 = (draft.q1[k] + height) % height;
    const int b2 = (draft.q2[k] + width) % width;
    w.src.push_back(b1 * width + b2);
    const int r = use_a ? draft.q1[k] - min1 : (draft.q1[k] - min1) % w.rows;
    const int c = use_a ? (draft.q2[k] - min2) % w.cols : draft.q2[k] - min2;
    const int d = r * w.cols + c;
    if (occupied[static_cast<size_t>(d)] != 0)
      throw std::logic_error("wedge wrapping is not injective");
    occupied[static_cast<size_t>(d)] = 1;
    w.dst.push_back(d);
  }
  return w;
}

}  // namespace

FdctPlan::FdctPlan(int width, int height, const CurveletConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  const int min_side = 1 << (cfg.n_scales + 2);
  if (width < min_side || height < min_side)
    raise(ErrorCode::ImageTooSmall,
          "image " + std::to_string(width) + "x" + std::to_string(height) +
              " too small for " + std::to_string(cfg.n_scales) +
              " scales (needs >= " + std::to_string(min_side) + " per side)");

  impl_->width = width;
  impl_->height = height;
  impl_->cfg = cfg;
  impl_->nangles = cfg.angles_per_scale();

  const int n_scales = cfg.n_scales;
  const double half_r = std::floor(height / 2.0);
  const double half_c = std::floor(width / 2.0);
  const double pi = std::numbers::pi;

  std::vector<std::vector<WedgeDraft>> drafts(static_cast<size_t>(n_scales));
  for (int j = 0; j < n_scales; ++j)
    drafts[static_cast<size_t>(j)].resize(
        static_cast<size_t>(impl_->nangles[static_cast<size_t>(j)]));

  // First pass: window values per frequency bin, accumulated per wedge.
  // sum_sq tracks the pointwise sum of squared windows across all wedges;
  // the construction makes it 1 up to roundoff and a final renormalisation
  // pins the tight-frame identity at machine precision.
  std::vector<double> sum_sq(static_cast<size_t>(height) * width, 0.0);
  struct Hit {
    int scale, angle;
    size_t pos;  // index into that wedge's draft arrays
  };
  std::vector<std::vector<Hit>> bin_hits(static_cast<size_t>(height) * width);

  for (int b1 = 0; b1 < height; ++b1) {
    const int q1 = (b1 < (height + 1) / 2) ? b1 : b1 - height;
    for (int b2 = 0; b2 < width; ++b2) {
      const int q2 = (b2 < (width + 1) / 2) ? b2 : b2 - width;
      const size_t bin = static_cast<size_t>(b1) * width + b2;
      const double rho =
          std::max(std::abs(q1) / half_r, std::abs(q2) / half_c);
      const double phi = std::atan2(q2 / half_c, q1 / half_r);

      for (int j = 0; j < n_scales; ++j) {
        const double rad = radial_window(j, n_scales, rho);
        if (rad == 0.0) continue;
        const int n_ang = impl_->nangles[static_cast<size_t>(j)];

        auto add = [&](int angle, double weight) {
          if (weight == 0.0) return;
          WedgeDraft& d = drafts[static_cast<size_t>(j)][static_cast<size_t>(angle)];
          bin_hits[bin].push_back({j, angle, d.win.size()});
          d.q1.push_back(q1);
          d.q2.push_back(q2);
          d.win.push_back(weight);
          sum_sq[bin] += weight * weight;
        };

        if (n_ang == 1) {
          add(0, rad);
          continue;
        }
        const double delta = 2.0 * pi / n_ang;
        double s = (phi + pi / 4.0) / delta;
        s -= std::floor(s / n_ang) * n_ang;
        int cell = static_cast<int>(std::floor(s));
        if (cell >= n_ang) cell = n_ang - 1;
        const double t = s - cell;
        double wl = 0.0, wr = 0.0;
        if (t < 0.5) {
          window_pair(t + 0.5, wl, wr);
          add(cell, rad * wl);
          add((cell - 1 + n_ang) % n_ang, rad * wr);
        } else {
          window_pair(t - 0.5, wl, wr);
          add(cell, rad * wr);
          add((cell + 1) % n_ang, rad * wl);
        }
      }
    }
  }

  // Renormalise: divide every window value at a bin by sqrt(sum of squares).
  for (size_t bin = 0; bin < sum_sq.size(); ++bin) {
    if (bin_hits[bin].empty()) continue;
    if (std::abs(sum_sq[bin] - 1.0) > 1e-6)
      throw std::logic_error("window partition deviates from unity");
    const double scale = 1.0 / std::sqrt(sum_sq[bin]);
    for (const Hit& h : bin_hits[bin]) {
      drafts[static_cast<size_t>(h.scale)][static_cast<size_t>(h.angle)]
          .win[h.pos] *= scale;
    }
  }

  // Second pass: choose wrapping layouts and build index maps.
  impl_->wedges.resize(static_cast<size_t>(n_scales));
  for (int j = 0; j < n_scales; ++j) {
    auto& row = impl_->wedges[static_cast<size_t>(j)];
    row.reserve(drafts[static_cast<size_t>(j)].size());
    for (const WedgeDraft& d : drafts[static_cast<size_t>(j)])
      row.push_back(wrap_wedge(d, height, width));
  }

  // FFT plans: one pair for the full grid, one per distinct wedge size.
  impl_->full = make_plan_pair(height, width);
  for (const auto& row : impl_->wedges) {
    for (const Wedge& w : row) {
      if (w.rows == 0) continue;
      const std::pair<int, int> key{w.rows, w.cols};
      if (impl_->wedge_plans.count(key) == 0)
        impl_->wedge_plans.emplace(key, make_plan_pair(w.rows, w.cols));
    }
  }
}

FdctPlan::~FdctPlan() = default;

int FdctPlan::width() const noexcept { return impl_->width; }
int FdctPlan::height() const noexcept { return impl_->height; }
const CurveletConfig& FdctPlan::config() const noexcept { return impl_->cfg; }
const std::vector<int>& FdctPlan::angle_counts() const noexcept {
  return impl_->nangles;
}

std::pair<int, int> FdctPlan::band_extent(int scale, int angle) const {
  const auto& w = impl_->wedges.at(static_cast<size_t>(scale))
                      .at(static_cast<size_t>(angle));
  return {w.rows, w.cols};
}

std::shared_ptr<const FdctPlan> make_fdct_plan(int width, int height,
                                               const CurveletConfig& cfg) {
  using Key = std::tuple<int, int, int, int, bool>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const FdctPlan>> cache;

  const Key key{width, height, cfg.n_scales, cfg.n_angles_coarse,
                cfg.finest_is_curvelets};
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<const FdctPlan>(width, height, cfg);
  cache.emplace(key, plan);
  return plan;
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

double CurveletPyramid::total_energy() const {
  double e = 0.0;
  for (const auto& row : bands)
    for (const auto& band : row)
      for (const std::complex<double>& c : band) e += std::norm(c);
  return e;
}

CurveletPyramid fdct_forward(const Grid<double>& image, const CurveletConfig& cfg) {
  return fdct_forward(image, make_fdct_plan(image.width(), image.height(), cfg));
}

CurveletPyramid fdct_forward(const Grid<double>& image,
                             std::shared_ptr<const FdctPlan> plan) {
  if (plan == nullptr) raise(ErrorCode::GeometryMismatch, "null curvelet plan");
  const FdctPlan::Impl& p = plan->impl();
  if (image.width() != p.width || image.height() != p.height)
    raise(ErrorCode::GeometryMismatch,
          "image size does not match the curvelet plan");

  const size_t total = static_cast<size_t>(p.width) * p.height;
  FftwBuffer spatial(total);
  FftwBuffer spectrum(total);
  {
    std::complex<double>* in = spatial.cplx();
    const double* px = image.data();
    for (size_t i = 0; i < total; ++i) in[i] = px[i];
  }
  run_fft(p.full.fwd, spatial, spectrum);
  const double inv_root = 1.0 / std::sqrt(static_cast<double>(total));
  {
    std::complex<double>* f = spectrum.cplx();
    for (size_t i = 0; i < total; ++i) f[i] *= inv_root;
  }

  CurveletPyramid pyr;
  pyr.plan = plan;
  pyr.bands.resize(p.wedges.size());
  struct Slot {
    int scale, angle;
  };
  std::vector<Slot> slots;
  for (size_t j = 0; j < p.wedges.size(); ++j) {
    pyr.bands[j].resize(p.wedges[j].size());
    for (size_t l = 0; l < p.wedges[j].size(); ++l)
      slots.push_back({static_cast<int>(j), static_cast<int>(l)});
  }

  const std::complex<double>* freq = spectrum.cplx();
  parallel_for(0, slots.size(), [&](size_t s) {
    const Wedge& w = p.wedges[static_cast<size_t>(slots[s].scale)]
                             [static_cast<size_t>(slots[s].angle)];
    Grid<std::complex<double>>& band =
        pyr.bands[static_cast<size_t>(slots[s].scale)]
                 [static_cast<size_t>(slots[s].angle)];
    if (w.rows == 0) return;
    const size_t count = static_cast<size_t>(w.rows) * w.cols;
    FftwBuffer wrapped(count);
    FftwBuffer coeffs(count);
    std::complex<double>* wp = wrapped.cplx();
    for (size_t k = 0; k < w.src.size(); ++k)
      wp[static_cast<size_t>(w.dst[k])] =
          freq[static_cast<size_t>(w.src[k])] * w.win[k];
    run_fft(p.plans_for(w.rows, w.cols).bwd, wrapped, coeffs);

    band = Grid<std::complex<double>>(w.cols, w.rows);
    const double scale = 1.0 / std::sqrt(static_cast<double>(count));
    const std::complex<double>* cp = coeffs.cplx();
    std::complex<double>* out = band.data();
    for (size_t i = 0; i < count; ++i) out[i] = cp[i] * scale;
  });

  return pyr;
}

namespace {

void check_pyramid(const CurveletPyramid& pyr) {
  if (pyr.plan == nullptr)
    raise(ErrorCode::GeometryMismatch, "pyramid has no curvelet plan");
  const FdctPlan::Impl& p = pyr.plan->impl();
  if (pyr.bands.size() != p.wedges.size())
    raise(ErrorCode::GeometryMismatch, "pyramid scale count does not match plan");
  for (size_t j = 0; j < p.wedges.size(); ++j) {
    if (pyr.bands[j].size() != p.wedges[j].size())
      raise(ErrorCode::GeometryMismatch, "pyramid angle count does not match plan");
    for (size_t l = 0; l < p.wedges[j].size(); ++l) {
      const Wedge& w = p.wedges[j][l];
      const auto& band = pyr.bands[j][l];
      if (band.height() != w.rows || band.width() != w.cols)
        raise(ErrorCode::GeometryMismatch, "band extent does not match plan");
    }
  }
}

// Shared synthesis path: scale_filter < 0 reconstructs from every scale,
// otherwise only from the given 0-based scale.
Grid<double> synthesize(const CurveletPyramid& pyr, int scale_filter) {
  check_pyramid(pyr);
  const FdctPlan::Impl& p = pyr.plan->impl();
  const size_t total = static_cast<size_t>(p.width) * p.height;

  struct Slot {
    int scale, angle;
  };
  std::vector<Slot> slots;
  for (size_t j = 0; j < p.wedges.size(); ++j) {
    if (scale_filter >= 0 && static_cast<int>(j) != scale_filter) continue;
    for (size_t l = 0; l < p.wedges[j].size(); ++l)
      if (p.wedges[j][l].rows > 0)
        slots.push_back({static_cast<int>(j), static_cast<int>(l)});
  }

  // Per-wedge forward FFTs in parallel, then a serial accumulation in fixed
  // wedge order so the result is bit-identical regardless of thread count.
  std::vector<std::vector<std::complex<double>>> wedge_freq(slots.size());
  parallel_for(0, slots.size(), [&](size_t s) {
    const Wedge& w = p.wedges[static_cast<size_t>(slots[s].scale)]
                             [static_cast<size_t>(slots[s].angle)];
    const auto& band = pyr.bands[static_cast<size_t>(slots[s].scale)]
                               [static_cast<size_t>(slots[s].angle)];
    const size_t count = static_cast<size_t>(w.rows) * w.cols;
    FftwBuffer in(count);
    FftwBuffer out(count);
    std::memcpy(in.ptr, band.data(), count * sizeof(fftw_complex));
    run_fft(p.plans_for(w.rows, w.cols).fwd, in, out);
    const double scale = 1.0 / std::sqrt(static_cast<double>(count));
    wedge_freq[s].resize(count);
    const std::complex<double>* op = out.cplx();
    for (size_t i = 0; i < count; ++i) wedge_freq[s][i] = op[i] * scale;
  });

  FftwBuffer acc(total);
  std::complex<double>* ap = acc.cplx();
  for (size_t s = 0; s < slots.size(); ++s) {
    const Wedge& w = p.wedges[static_cast<size_t>(slots[s].scale)]
                             [static_cast<size_t>(slots[s].angle)];
    const std::vector<std::complex<double>>& freq = wedge_freq[s];
    for (size_t k = 0; k < w.src.size(); ++k)
      ap[static_cast<size_t>(w.src[k])] +=
          freq[static_cast<size_t>(w.dst[k])] * w.win[k];
  }

  FftwBuffer spatial(total);
  run_fft(p.full.bwd, acc, spatial);
  const double inv_root = 1.0 / std::sqrt(static_cast<double>(total));
  Grid<double> image(p.width, p.height);
  const std::complex<double>* sp = spatial.cplx();
  double* out = image.data();
  for (size_t i = 0; i < total; ++i) out[i] = sp[i].real() * inv_root;
  return image;
}

}  // namespace

Grid<double> fdct_inverse(const CurveletPyramid& pyramid) {
  return synthesize(pyramid, -1);
}

Grid<double> reconstruct_scale(const CurveletPyramid& pyramid, int scale) {
  if (pyramid.plan == nullptr)
    raise(ErrorCode::GeometryMismatch, "pyramid has no curvelet plan");
  const int n = static_cast<int>(pyramid.bands.size());
  if (scale < 1 || scale > n)
    raise(ErrorCode::ScaleOutOfRange,
          "scale " + std::to_string(scale) + " outside [1, " +
              std::to_string(n) + "]");
  return synthesize(pyramid, scale - 1);
}

// ---------------------------------------------------------------------------
// Coefficient serialisation. Little-endian host assumed (checked).
// ---------------------------------------------------------------------------

namespace {

constexpr char kCoeffMagic[8] = {'C', 'U', 'R', 'V', 'C', 'O', 'E', 'F'};

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) raise(ErrorCode::ParseError, "truncated coefficient file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_coefficients(const CurveletPyramid& pyramid, const std::string& path) {
  check_pyramid(pyramid);
  const FdctPlan& plan = *pyramid.plan;
  atomic_write(path, [&](std::ostream& out) {
    out.write(kCoeffMagic, sizeof(kCoeffMagic));
    put_u32(out, static_cast<uint32_t>(plan.width()));
    put_u32(out, static_cast<uint32_t>(plan.height()));
    put_u32(out, static_cast<uint32_t>(plan.config().n_scales));
    put_u32(out, static_cast<uint32_t>(plan.config().n_angles_coarse));
    put_u32(out, plan.config().finest_is_curvelets ? 1u : 0u);
    for (const auto& row : pyramid.bands) {
      put_u32(out, static_cast<uint32_t>(row.size()));
      for (const auto& band : row) {
        put_u32(out, static_cast<uint32_t>(band.height()));
        put_u32(out, static_cast<uint32_t>(band.width()));
      }
    }
    for (const auto& row : pyramid.bands) {
      for (const auto& band : row) {
        static_assert(sizeof(std::complex<double>) == 16);
        out.write(reinterpret_cast<const char*>(band.data()),
                  static_cast<std::streamsize>(band.size() * 16));
      }
    }
    if (!out) raise(ErrorCode::IoError, "failed writing coefficients to " + path);
  });
}

CurveletPyramid read_coefficients(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCoeffMagic, 8) != 0)
    raise(ErrorCode::ParseError, path + " is not a curvelet coefficient file");

  const int width = static_cast<int>(get_u32(in));
  const int height = static_cast<int>(get_u32(in));
  CurveletConfig cfg;
  cfg.n_scales = static_cast<int>(get_u32(in));
  cfg.n_angles_coarse = static_cast<int>(get_u32(in));
  cfg.finest_is_curvelets = get_u32(in) != 0;
  cfg.validate();

  auto plan = make_fdct_plan(width, height, cfg);
  CurveletPyramid pyr;
  pyr.plan = plan;
  pyr.bands.resize(static_cast<size_t>(cfg.n_scales));
  for (int j = 0; j < cfg.n_scales; ++j) {
    const uint32_t n_ang = get_u32(in);
    if (static_cast<int>(n_ang) != plan->angle_counts()[static_cast<size_t>(j)])
      raise(ErrorCode::ParseError, "coefficient file angle layout mismatch");
    auto& row = pyr.bands[static_cast<size_t>(j)];
    row.resize(n_ang);
    for (uint32_t l = 0; l < n_ang; ++l) {
      const int rows = static_cast<int>(get_u32(in));
      const int cols = static_cast<int>(get_u32(in));
      const auto expect = plan->band_extent(j, static_cast<int>(l));
      if (rows != expect.first || cols != expect.second)
        raise(ErrorCode::ParseError, "coefficient file band extent mismatch");
      row[l] = Grid<std::complex<double>>(cols, rows);
    }
  }
  for (auto& row : pyr.bands) {
    for (auto& band : row) {
      in.read(reinterpret_cast<char*>(band.data()),
              static_cast<std::streamsize>(band.size() * 16));
      if (!in) raise(ErrorCode::ParseError, "truncated coefficient file");
    }
  }
  return pyr;
}

// ---------------------------------------------------------------------------
// Display mosaic
// ---------------------------------------------------------------------------

Grid<double> coefficient_mosaic(const CurveletPyramid& pyramid, int size) {
  check_pyramid(pyramid);
  if (size < 16) raise(ErrorCode::InvalidConfig, "mosaic size too small");
  const FdctPlan::Impl& p = pyramid.plan->impl();
  const int n_scales = p.cfg.n_scales;
  const double pi = std::numbers::pi;
  const double half = size / 2.0;

  auto sample = [&](int j, int l, double a, double b) -> double {
    const auto& band = pyramid.bands[static_cast<size_t>(j)][static_cast<size_t>(l)];
    if (band.size() == 0) return 0.0;
    int r = static_cast<int>(a * band.height());
    int c = static_cast<int>(b * band.width());
    r = std::clamp(r, 0, band.height() - 1);
    c = std::clamp(c, 0, band.width() - 1);
    return std::log1p(std::abs(band.at(c, r)));
  };

  Grid<double> canvas(size, size, 0.0);
  double peak = 0.0;
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      const double dr = row + 0.5 - half;
      const double dc = col + 0.5 - half;
      const double radius = std::max(std::abs(dr), std::abs(dc));
      // Dyadic coronae: scale j occupies radii (half * 2^(j - J) , half * 2^(j + 1 - J)].
      int j = 0;
      double inner = 0.0, outer = half * std::ldexp(1.0, 1 - n_scales);
      while (j + 1 < n_scales && radius > outer) {
        ++j;
        inner = outer;
        outer = half * std::ldexp(1.0, j + 1 - n_scales);
      }
      double value = 0.0;
      const int n_ang = p.nangles[static_cast<size_t>(j)];
      if (n_ang == 1) {
        const double a = (dr + outer) / (2.0 * outer);
        const double b = (dc + outer) / (2.0 * outer);
        value = sample(j, 0, std::clamp(a, 0.0, 1.0), std::clamp(b, 0.0, 1.0));
      } else {
        const double phi = std::atan2(dc, dr);
        const double delta = 2.0 * pi / n_ang;
        double s = (phi + pi / 4.0) / delta;
        s -= std::floor(s / n_ang) * n_ang;
        int cell = static_cast<int>(std::floor(s));
        if (cell >= n_ang) cell = n_ang - 1;
        const double a = std::clamp((radius - inner) / (outer - inner), 0.0, 1.0);
        value = sample(j, cell, a, s - cell);
      }
      canvas.at(col, row) = value;
      peak = std::max(peak, value);
    }
  }
  if (peak > 0.0)
    for (double& v : canvas) v /= peak;
  return canvas;
}

}  // namespace curvreg
