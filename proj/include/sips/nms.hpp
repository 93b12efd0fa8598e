#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sips/core.hpp"

namespace sips {

struct InterestPoint {
  int x = 0;
  int y = 0;
  double score = 0.0;
};

/// Points ordered by descending score (ties broken by row-major pixel
/// index); any two points are separated by more than nms_radius pixels.
struct InterestPointSet {
  std::vector<InterestPoint> points;
  int nms_radius = 0;

  int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

/// Score ordering used everywhere: higher score first, row-major pixel
/// index ((y, x) lexicographic) breaks ties.
inline bool better_point(const InterestPoint& a, const InterestPoint& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace detail

/// Greedy non-maximum suppression: repeatedly take the highest-scoring
/// unsuppressed pixel with positive score and suppress everything within
/// Euclidean distance <= radius, until n points are taken or no candidates
/// remain. Output order is selection order.
inline InterestPointSet nms_select(const ScoreMap& score, int n, int radius) {
  if (n < 1) throw std::invalid_argument("nms_select: n must be >= 1");
  if (radius < 1) throw std::invalid_argument("nms_select: radius must be >= 1");

  const int w = score.width();
  const int h = score.height();

  std::vector<std::uint32_t> order;
  order.reserve(score.size() / 4);
  for (std::uint32_t i = 0; i < score.size(); ++i) {
    if (score[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(),
            [&score](std::uint32_t a, std::uint32_t b) {
              if (score[a] != score[b]) return score[a] > score[b];
              return a < b;  // row-major tie-break
            });

  // Precomputed half-widths of the suppression disk per row offset.
  std::vector<int> span(radius + 1);
  for (int dy = 0; dy <= radius; ++dy) {
    span[dy] = static_cast<int>(std::floor(
        std::sqrt(static_cast<double>(radius) * radius - double(dy) * dy)));
  }

  std::vector<char> suppressed(score.size(), 0);
  InterestPointSet result;
  result.nms_radius = radius;
  result.points.reserve(std::min<std::size_t>(n, order.size()));

  for (std::uint32_t idx : order) {
    if (suppressed[idx]) continue;
    const int x = static_cast<int>(idx % w);
    const int y = static_cast<int>(idx / w);
    result.points.push_back({x, y, score[idx]});
    if (result.size() == n) break;
    for (int dy = -radius; dy <= radius; ++dy) {
      const int yy = y + dy;
      if (yy < 0 || yy >= h) continue;
      const int half = span[std::abs(dy)];
      const int x0 = std::max(0, x - half);
      const int x1 = std::min(w - 1, x + half);
      std::fill(suppressed.begin() + score.index(x0, yy),
                suppressed.begin() + score.index(x1, yy) + 1, char(1));
    }
  }
  return result;
}

/// First n points of a set (NMS output is prefix-monotone in n).
inline InterestPointSet prefix(const InterestPointSet& set, int n) {
  InterestPointSet out;
  out.nms_radius = set.nms_radius;
  const int count = std::min<int>(n, set.size());
  out.points.assign(set.points.begin(), set.points.begin() + count);
  return out;
}

/// Rank of point j: 1 + number of points that score strictly higher
/// (ties broken by row-major pixel index).
inline int rank_of(const InterestPointSet& set, int j) {
  if (j < 0 || j >= set.size()) {
    throw std::invalid_argument("rank_of: point index out of range");
  }
  int rank = 1;
  for (int i = 0; i < set.size(); ++i) {
    if (i != j && detail::better_point(set.points[i], set.points[j])) ++rank;
  }
  return rank;
}

/// Ranks for every point, 1-based; a permutation of 1..n.
inline std::vector<int> ranking(const InterestPointSet& set) {
  const int n = set.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&set](int a, int b) {
    return detail::better_point(set.points[a], set.points[b]);
  });
  std::vector<int> ranks(n);
  for (int r = 0; r < n; ++r) ranks[idx[r]] = r + 1;
  return ranks;
}

/// Maps rank (1-based) to point index; inverse of ranking().
inline std::vector<int> inverse_ranking(const InterestPointSet& set) {
  const std::vector<int> ranks = ranking(set);
  std::vector<int> inv(set.size());
  for (int i = 0; i < set.size(); ++i) inv[ranks[i] - 1] = i;
  return inv;
}

}  // namespace sips
