#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "sips/convolution.hpp"
#include "sips/core.hpp"
#include "sips/nms.hpp"
#include "sips/rng.hpp"

namespace sips {

struct BinaryDescriptor {
  std::array<std::uint64_t, 4> bits{};  // 256 bits

  void set(int i) { bits[i >> 6] |= std::uint64_t{1} << (i & 63); }

  int hamming(const BinaryDescriptor& other) const {
    int d = 0;
    for (int w = 0; w < 4; ++w) d += std::popcount(bits[w] ^ other.bits[w]);
    return d;
  }
};

constexpr int kDescriptorBits = 256;
constexpr int kPatternExtent = 15;   // offsets live in [-15, 15]^2
constexpr int kDescriptorMargin = 16;  // pattern support + smoothing

struct PatternPair {
  int ax, ay, bx, by;
};

/// 256 offset pairs shared by both images of a pair; fixed per seed.
struct SamplingPattern {
  std::uint64_t seed = 0;
  std::array<PatternPair, kDescriptorBits> pairs{};
};

/// Offsets drawn i.i.d. from an isotropic Gaussian (sigma = 6 px), rounded
/// and clamped to [-15, 15]. Deterministic in the seed.
inline SamplingPattern make_pattern(std::uint64_t seed) {
  SamplingPattern pattern;
  pattern.seed = seed;
  Rng rng(mix_seed(seed, 0xb21e5u));
  auto draw = [&rng]() {
    const int v = static_cast<int>(std::lround(rng.gaussian() * 6.0));
    return std::clamp(v, -kPatternExtent, kPatternExtent);
  };
  for (auto& p : pattern.pairs) {
    p.ax = draw();
    p.ay = draw();
    p.bx = draw();
    p.by = draw();
  }
  return pattern;
}

struct DescribedPoint {
  int point_index = 0;  // index into the InterestPointSet it came from
  BinaryDescriptor descriptor;
};

/// BRIEF-style description: bit b is 1 iff the 3x3-box-smoothed intensity at
/// the pair's first offset is strictly below the one at the second offset.
/// Points closer than 16 px to any border are dropped.
inline std::vector<DescribedPoint> describe(const GrayImage& img,
                                            const InterestPointSet& points,
                                            const SamplingPattern& pattern) {
  const ScoreMap smooth = box_mean(img, 3);
  std::vector<DescribedPoint> out;
  out.reserve(points.points.size());
  for (int j = 0; j < points.size(); ++j) {
    const InterestPoint& p = points.points[j];
    if (p.x < kDescriptorMargin || p.x >= img.width() - kDescriptorMargin ||
        p.y < kDescriptorMargin || p.y >= img.height() - kDescriptorMargin) {
      continue;
    }
    DescribedPoint dp;
    dp.point_index = j;
    for (int b = 0; b < kDescriptorBits; ++b) {
      const PatternPair& pr = pattern.pairs[b];
      const double va = smooth.at(p.x + pr.ax, p.y + pr.ay);
      const double vb = smooth.at(p.x + pr.bx, p.y + pr.by);
      if (va < vb) dp.descriptor.set(b);
    }
    out.push_back(dp);
  }
  return out;
}

struct Match {
  int idx0 = 0;  // point index in P0
  int idx1 = 0;  // point index in P1
  int distance = 0;
};

struct MatchSet {
  std::vector<Match> matches;

  int size() const { return static_cast<int>(matches.size()); }
  bool empty() const { return matches.empty(); }
};

/// Cross-checked brute-force matching: (a, b) is kept iff b is a's nearest
/// neighbor and a is b's, under Hamming distance. Ties at the argmin go to
/// the smaller list index.
inline MatchSet match_brute_force(const std::vector<DescribedPoint>& d0,
                                  const std::vector<DescribedPoint>& d1) {
  MatchSet out;
  if (d0.empty() || d1.empty()) return out;

  const int n0 = static_cast<int>(d0.size());
  const int n1 = static_cast<int>(d1.size());
  std::vector<int> best01(n0, -1), best10(n1, -1);
  std::vector<int> dist01(n0, kDescriptorBits + 1), dist10(n1, kDescriptorBits + 1);
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const int d = d0[i].descriptor.hamming(d1[j].descriptor);
      if (d < dist01[i]) {  // strict: first minimum wins ties
        dist01[i] = d;
        best01[i] = j;
      }
      if (d < dist10[j]) {
        dist10[j] = d;
        best10[j] = i;
      }
    }
  }
  for (int i = 0; i < n0; ++i) {
    const int j = best01[i];
    if (j >= 0 && best10[j] == i) {
      out.matches.push_back({d0[i].point_index, d1[j].point_index, dist01[i]});
    }
  }
  return out;
}

}  // namespace sips
