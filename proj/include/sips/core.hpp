#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sips {

/// Malformed or inconsistent input data (bad files, mismatched sizes).
/// Mapped to exit code 2 by the CLI.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at runtime (estimation failed, non-finite values).
/// Mapped to exit code 3 by the CLI.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major 2-D grid. Shared container for images, score maps and
/// depth maps; the element type distinguishes them (see aliases below).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("Grid: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }

  /// Edge-replicated access; defined for any (x, y).
  const T& at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return data_[index(x, y)];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_size(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Intensity image, values in [0,1], 32-bit float storage.
using GrayImage = Grid<float>;

/// Per-pixel score map. Double precision so that analytic gradients and
/// finite-difference checks are not limited by storage rounding.
using ScoreMap = Grid<double>;

/// Gradient of a loss with respect to a score map; same layout as ScoreMap.
using ScoreGradient = Grid<double>;

/// Per-pixel depth in meters; 0 marks invalid.
using DepthMap = Grid<float>;

/// Image pyramid, level 0 = full resolution, factor 2 between levels.
struct Pyramid {
  std::vector<GrayImage> levels;
};

/// Throws DataError unless every intensity is finite and in [0,1].
inline void validate_intensities(const GrayImage& img,
                                 const std::string& context) {
  for (float v : img.raw()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw DataError(context + ": intensity outside [0,1]");
    }
  }
}

}  // namespace sips
