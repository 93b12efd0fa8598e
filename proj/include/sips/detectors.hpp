#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sips/convolution.hpp"
#include "sips/core.hpp"
#include "sips/image_io.hpp"

namespace sips {

/// Which scoring function fills the pipeline's per-pixel score slot.
enum class DetectorKind { kHarris, kShiTomasi, kFast, kDog, kExternal, kNetwork };

inline const char* to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kHarris: return "harris";
    case DetectorKind::kShiTomasi: return "shitomasi";
    case DetectorKind::kFast: return "fast";
    case DetectorKind::kDog: return "dog";
    case DetectorKind::kExternal: return "external";
    case DetectorKind::kNetwork: return "network";
  }
  return "?";
}

inline DetectorKind detector_from_string(const std::string& name) {
  if (name == "harris") return DetectorKind::kHarris;
  if (name == "shitomasi") return DetectorKind::kShiTomasi;
  if (name == "fast") return DetectorKind::kFast;
  if (name == "dog") return DetectorKind::kDog;
  if (name == "external") return DetectorKind::kExternal;
  if (name == "network") return DetectorKind::kNetwork;
  throw std::invalid_argument("unknown detector: " + name);
}

namespace detail {

struct StructureTensorMaps {
  ScoreMap xx, xy, yy;  // window-summed gradient products
};

inline StructureTensorMaps structure_tensor(const GrayImage& img, int window) {
  if (window % 2 == 0 || window < 3) {
    throw std::invalid_argument("structure tensor: window must be odd, >= 3");
  }
  if (img.width() < window || img.height() < window) {
    throw std::invalid_argument("structure tensor: image smaller than window");
  }
  auto [ix, iy] = gradients(img);
  ScoreMap xx(img.width(), img.height());
  ScoreMap xy(img.width(), img.height());
  ScoreMap yy(img.width(), img.height());
  for (std::size_t i = 0; i < xx.size(); ++i) {
    xx[i] = ix[i] * ix[i];
    xy[i] = ix[i] * iy[i];
    yy[i] = iy[i] * iy[i];
  }
  Grid<double> ones(window, window, 1.0);
  return {convolve2d(xx, ones, ConvMode::kSameReplicate),
          convolve2d(xy, ones, ConvMode::kSameReplicate),
          convolve2d(yy, ones, ConvMode::kSameReplicate)};
}

}  // namespace detail

/// Harris corner response det(M) - kappa * trace(M)^2 with the structure
/// tensor M summed over an odd window with uniform weights.
inline ScoreMap harris_score(const GrayImage& img, int window = 3,
                             double kappa = 0.04) {
  if (kappa < 0.02 || kappa > 0.3) {
    throw std::invalid_argument("harris_score: kappa outside [0.02, 0.3]");
  }
  auto maps = detail::structure_tensor(img, window);
  ScoreMap out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double det = maps.xx[i] * maps.yy[i] - maps.xy[i] * maps.xy[i];
    const double trace = maps.xx[i] + maps.yy[i];
    out[i] = det - kappa * trace * trace;
  }
  return out;
}

/// Shi-Tomasi response: minimum eigenvalue of the structure tensor.
inline ScoreMap shi_tomasi_score(const GrayImage& img, int window = 3) {
  auto maps = detail::structure_tensor(img, window);
  ScoreMap out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = maps.xx[i];
    const double b = maps.yy[i];
    const double c = maps.xy[i];
    const double disc = std::sqrt((a - b) * (a - b) + 4.0 * c * c);
    out[i] = 0.5 * (a + b - disc);
  }
  return out;
}

namespace detail {

// 16-pixel Bresenham circle of radius 3, clockwise from 12 o'clock.
inline constexpr std::array<std::array<int, 2>, 16> kFastCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

/// FAST-9 segment test at threshold t: some 9-contiguous arc of the circle
/// is entirely brighter than center+t or entirely darker than center-t.
inline bool fast_corner_at(const GrayImage& img, int x, int y, double t) {
  const double center = img.at(x, y);
  unsigned brighter = 0, darker = 0;
  for (int i = 0; i < 16; ++i) {
    const double v = img.at(x + kFastCircle[i][0], y + kFastCircle[i][1]);
    if (v > center + t) brighter |= 1u << i;
    if (v < center - t) darker |= 1u << i;
  }
  auto has_arc9 = [](unsigned mask) {
    if (mask == 0) return false;
    const unsigned wrapped = mask | (mask << 16);  // circular runs
    int run = 0;
    for (int i = 0; i < 32; ++i) {
      run = (wrapped >> i) & 1u ? run + 1 : 0;
      if (run >= 9) return true;
    }
    return false;
  };
  return has_arc9(brighter) || has_arc9(darker);
}

}  // namespace detail

/// FAST-9 score map: at pixels passing the segment test at `threshold`, the
/// score is the maximum threshold for which the pixel remains a corner,
/// found by bisection; elsewhere (and in the 3-pixel border band) 0.
inline ScoreMap fast_score(const GrayImage& img, double threshold) {
  if (img.width() < 7 || img.height() < 7) {
    throw std::invalid_argument("fast_score: image must be at least 7x7");
  }
  ScoreMap out(img.width(), img.height(), 0.0);
  for (int y = 3; y < img.height() - 3; ++y) {
    for (int x = 3; x < img.width() - 3; ++x) {
      if (!detail::fast_corner_at(img, x, y, threshold)) continue;
      double lo = threshold;  // still a corner here
      double hi = 1.0;        // intensities span at most [0,1]
      for (int iter = 0; iter < 30; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (detail::fast_corner_at(img, x, y, mid)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      out.at(x, y) = lo;
    }
  }
  return out;
}

/// Difference-of-Gaussians magnitude |G(k*sigma) - G(sigma)| applied to img.
inline ScoreMap dog_score(const GrayImage& img, double sigma = 1.0,
                          double k = 1.6) {
  if (!(sigma > 0.0) || !(k > 1.0)) {
    throw std::invalid_argument("dog_score: need sigma > 0 and k > 1");
  }
  ScoreMap wide = gaussian_blur(img, k * sigma);
  ScoreMap narrow = gaussian_blur(img, sigma);
  ScoreMap out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(wide[i] - narrow[i]);
  }
  return out;
}

/// Reads a score map stored as 16-bit grayscale PNG (value/65535 = score).
inline ScoreMap load_external_scoremap(const std::string& path,
                                       int expected_width,
                                       int expected_height) {
  Grid<std::uint16_t> raw = load_png_u16(path);
  if (raw.width() != expected_width || raw.height() != expected_height) {
    throw DataError("score map dimensions mismatch: " + path);
  }
  ScoreMap out(raw.width(), raw.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(raw[i]) / 65535.0;
  }
  return out;
}

/// Writes a [0,1] score map in the external 16-bit PNG format.
inline void save_external_scoremap(const ScoreMap& map,
                                   const std::string& path) {
  Grid<std::uint16_t> raw(map.width(), map.height());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double v = std::clamp(map[i], 0.0, 1.0);
    raw[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  save_png_u16(raw, path);
}

}  // namespace sips
