#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace curvreg {

/// Dense row-major 2D array. Pixel access is (u, v) = (column, row) to match
/// range-image conventions: u indexes azimuth (width X), v elevation (height Y).
template <typename T>
class Grid {
public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        cells_(static_cast<size_t>(width) * static_cast<size_t>(height), fill) {
    assert(width >= 0 && height >= 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  bool contains(int u, int v) const noexcept {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }

  T& at(int u, int v) {
    assert(contains(u, v));
    return cells_[static_cast<size_t>(v) * width_ + u];
  }
  const T& at(int u, int v) const {
    assert(contains(u, v));
    return cells_[static_cast<size_t>(v) * width_ + u];
  }

  /// Access with coordinates clamped to the image rectangle (edge replication).
  const T& at_clamped(int u, int v) const {
    u = u < 0 ? 0 : (u >= width_ ? width_ - 1 : u);
    v = v < 0 ? 0 : (v >= height_ ? height_ - 1 : v);
    return cells_[static_cast<size_t>(v) * width_ + u];
  }

  T* data() noexcept { return cells_.data(); }
  const T* data() const noexcept { return cells_.data(); }

  auto begin() noexcept { return cells_.begin(); }
  auto end() noexcept { return cells_.end(); }
  auto begin() const noexcept { return cells_.begin(); }
  auto end() const noexcept { return cells_.end(); }

  void fill(const T& value) { cells_.assign(cells_.size(), value); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.cells_ == b.cells_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

}  // namespace curvreg
