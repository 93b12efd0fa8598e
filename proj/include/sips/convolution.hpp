#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sips/core.hpp"

namespace sips {

enum class ConvMode {
  kValid,          // output shrinks by (kernel side - 1) per dimension
  kSameReplicate,  // output keeps dimensions, borders edge-replicated
};

/// Dense 2-D convolution (correlation form: the kernel is not flipped).
/// Kernel side lengths must be odd.
template <typename T>
ScoreMap convolve2d(const Grid<T>& img, const Grid<double>& kernel,
                    ConvMode mode) {
  const int kw = kernel.width();
  const int kh = kernel.height();
  if (kw % 2 == 0 || kh % 2 == 0) {
    throw std::invalid_argument("convolve2d: kernel sides must be odd");
  }
  const int rx = kw / 2;
  const int ry = kh / 2;

  if (mode == ConvMode::kValid) {
    const int ow = img.width() - (kw - 1);
    const int oh = img.height() - (kh - 1);
    if (ow <= 0 || oh <= 0) {
      throw std::invalid_argument("convolve2d: kernel larger than image");
    }
    ScoreMap out(ow, oh);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            acc += kernel.at(kx, ky) *
                   static_cast<double>(img.at(x + kx, y + ky));
          }
        }
        out.at(x, y) = acc;
      }
    }
    return out;
  }

  ScoreMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int ky = -ry; ky <= ry; ++ky) {
        for (int kx = -rx; kx <= rx; ++kx) {
          acc += kernel.at(kx + rx, ky + ry) *
                 static_cast<double>(img.at_clamped(x + kx, y + ky));
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

/// Central-difference gradients with replicated borders.
/// Ix(x,y) = (I(x+1,y) - I(x-1,y)) / 2, Iy analogous.
template <typename T>
std::pair<ScoreMap, ScoreMap> gradients(const Grid<T>& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw std::invalid_argument("gradients: image must be at least 3x3");
  }
  ScoreMap ix(img.width(), img.height());
  ScoreMap iy(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      ix.at(x, y) = 0.5 * (static_cast<double>(img.at_clamped(x + 1, y)) -
                           static_cast<double>(img.at_clamped(x - 1, y)));
      iy.at(x, y) = 0.5 * (static_cast<double>(img.at_clamped(x, y + 1)) -
                           static_cast<double>(img.at_clamped(x, y - 1)));
    }
  }
  return {std::move(ix), std::move(iy)};
}

/// Normalized 1-D Gaussian taps, truncated at radius ceil(3*sigma).
inline std::vector<double> gaussian_taps(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_taps: sigma must be positive");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[i + radius] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

/// Separable Gaussian blur, edge-replicated.
template <typename T>
ScoreMap gaussian_blur(const Grid<T>& img, double sigma) {
  const std::vector<double> taps = gaussian_taps(sigma);
  const int n = static_cast<int>(taps.size());
  Grid<double> row_kernel(n, 1);
  Grid<double> col_kernel(1, n);
  for (int i = 0; i < n; ++i) {
    row_kernel.at(i, 0) = taps[i];
    col_kernel.at(0, i) = taps[i];
  }
  ScoreMap horizontal = convolve2d(img, row_kernel, ConvMode::kSameReplicate);
  return convolve2d(horizontal, col_kernel, ConvMode::kSameReplicate);
}

/// Gaussian pyramid: each level is blur(sigma) then 2x decimation of the
/// previous one, so level dims are ceil(previous / 2).
inline Pyramid gaussian_pyramid(const GrayImage& img, int levels,
                                double sigma) {
  if (levels < 1) {
    throw std::invalid_argument("gaussian_pyramid: need at least one level");
  }
  {
    int w = img.width(), h = img.height();
    for (int l = 1; l < levels; ++l) {
      w = (w + 1) / 2;
      h = (h + 1) / 2;
    }
    if (w < 8 || h < 8) {
      throw std::invalid_argument(
          "gaussian_pyramid: too many levels for image size");
    }
  }

  Pyramid pyr;
  pyr.levels.push_back(img);
  for (int l = 1; l < levels; ++l) {
    const GrayImage& prev = pyr.levels.back();
    ScoreMap blurred = gaussian_blur(prev, sigma);
    GrayImage next((prev.width() + 1) / 2, (prev.height() + 1) / 2);
    for (int y = 0; y < next.height(); ++y) {
      for (int x = 0; x < next.width(); ++x) {
        next.at(x, y) = static_cast<float>(blurred.at(2 * x, 2 * y));
      }
    }
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

/// Uniform box sum over an odd window, edge-replicated, same size.
template <typename T>
ScoreMap box_mean(const Grid<T>& img, int window) {
  if (window % 2 == 0 || window < 1) {
    throw std::invalid_argument("box_mean: window must be odd and positive");
  }
  Grid<double> kernel(window, window, 1.0 / (window * window));
  return convolve2d(img, kernel, ConvMode::kSameReplicate);
}

}  // namespace sips
