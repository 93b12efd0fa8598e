#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sips/core.hpp"
#include "sips/descriptors.hpp"
#include "sips/rng.hpp"

namespace sips {

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
};

inline Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

inline bool is_valid_rotation(const Eigen::Matrix3d& r, double tol = 1e-9) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Rodrigues: rotation matrix of an axis-angle vector.
inline Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  Eigen::Matrix3d hat;
  hat << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-12) {
    return Eigen::Matrix3d::Identity() + hat;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + s * hat + c * hat * hat;
}

/// Rigid transform X_out = R * X_in + t. Used both for camera-to-world
/// poses and for the relative pose mapping camera-0 into camera-1 frame.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return R * x + t; }

  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

  /// Composition: (a * b) applies b first, then a.
  friend Pose operator*(const Pose& a, const Pose& b) {
    return {a.R * b.R, a.R * b.t + a.t};
  }
};

/// Relative pose T_1^0 (camera-0 coordinates into camera-1) from two
/// camera-to-world poses.
inline Pose relative_pose(const Pose& cam_to_world_0,
                          const Pose& cam_to_world_1) {
  return cam_to_world_1.inverse() * cam_to_world_0;
}

/// Pinhole projection of a camera-frame point already expressed through
/// `pose`; nullopt when the point lands behind the camera.
inline std::optional<Eigen::Vector2d> project(const Pose& pose,
                                              const CameraIntrinsics& k,
                                              const Eigen::Vector3d& x) {
  const Eigen::Vector3d c = pose * x;
  if (c.z() <= 1e-6) return std::nullopt;
  return Eigen::Vector2d(k.fx * c.x() / c.z() + k.cx,
                         k.fy * c.y() / c.z() + k.cy);
}

inline Eigen::Vector3d backproject(const CameraIntrinsics& k,
                                   const Eigen::Vector2d& pixel,
                                   double depth) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("backproject: depth must be positive");
  }
  return depth * Eigen::Vector3d((pixel.x() - k.cx) / k.fx,
                                 (pixel.y() - k.cy) / k.fy, 1.0);
}

inline Eigen::Vector3d bearing_from_pixel(const CameraIntrinsics& k,
                                          const Eigen::Vector2d& pixel) {
  return Eigen::Vector3d((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy,
                         1.0)
      .normalized();
}

struct PoseErrors {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

/// Geodesic rotation angle of R_est * R_gt^T (degrees) and Euclidean
/// translation difference (meters).
inline PoseErrors pose_errors(const Pose& estimate, const Pose& ground_truth) {
  const Eigen::Matrix3d rel = estimate.R * ground_truth.R.transpose();
  const double cos_angle = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
  return {std::acos(cos_angle) * 180.0 / M_PI,
          (estimate.t - ground_truth.t).norm()};
}

namespace detail {

// Ascending-coefficient polynomial helpers for the Grunert quartic.
template <std::size_t N, std::size_t M>
std::array<double, N + M - 1> poly_mul(const std::array<double, N>& a,
                                       const std::array<double, M>& b) {
  std::array<double, N + M - 1> out{};
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Real roots via companion-matrix eigenvalues; tiny leading coefficients
/// are trimmed. Coefficients ascending.
inline std::vector<double> real_roots(std::vector<double> coeffs) {
  double max_abs = 0.0;
  for (double c : coeffs) max_abs = std::max(max_abs, std::abs(c));
  if (max_abs == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-14 * max_abs) {
    coeffs.pop_back();
  }
  const int degree = static_cast<int>(coeffs.size()) - 1;
  if (degree < 1) return {};
  if (degree == 1) return {-coeffs[0] / coeffs[1]};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) {
    companion(i, degree - 1) = -coeffs[i] / coeffs[degree];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion);
  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const std::complex<double> z = solver.eigenvalues()[i];
    if (std::abs(z.imag()) < 1e-6 * std::max(1.0, std::abs(z.real()))) {
      roots.push_back(z.real());
    }
  }
  return roots;
}

/// Newton refinement of the three camera-to-point distances on the
/// law-of-cosines system; drives solutions to machine precision.
inline bool refine_distances(Eigen::Vector3d& s, double ca, double cb,
                             double cg, double a, double b, double c) {
  for (int iter = 0; iter < 8; ++iter) {
    const double s1 = s[0], s2 = s[1], s3 = s[2];
    Eigen::Vector3d g(s2 * s2 + s3 * s3 - 2 * s2 * s3 * ca - a * a,
                      s1 * s1 + s3 * s3 - 2 * s1 * s3 * cb - b * b,
                      s1 * s1 + s2 * s2 - 2 * s1 * s2 * cg - c * c);
    Eigen::Matrix3d j;
    j << 0, 2 * s2 - 2 * s3 * ca, 2 * s3 - 2 * s2 * ca,
        2 * s1 - 2 * s3 * cb, 0, 2 * s3 - 2 * s1 * cb,
        2 * s1 - 2 * s2 * cg, 2 * s2 - 2 * s1 * cg, 0;
    if (std::abs(j.determinant()) < 1e-14) return false;
    s -= j.inverse() * g;
  }
  return s.minCoeff() > 0.0;
}

/// Kabsch absolute orientation: rigid transform with dst = R * src + t.
inline Pose kabsch(const std::array<Eigen::Vector3d, 3>& src,
                   const std::array<Eigen::Vector3d, 3>& dst) {
  Eigen::Vector3d cs = (src[0] + src[1] + src[2]) / 3.0;
  Eigen::Vector3d cd = (dst[0] + dst[1] + dst[2]) / 3.0;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    h += (src[i] - cs) * (dst[i] - cd).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) {
    d(2, 2) = -1.0;
  }
  Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return {r, cd - r * cs};
}

}  // namespace detail

/// Three-point resection (Grunert's quartic): recovers up to four poses
/// with bearing_i || (R * world_i + t). Bearings must be unit vectors,
/// world points non-collinear.
inline std::vector<Pose> p3p_solve(
    const std::array<Eigen::Vector3d, 3>& bearings,
    const std::array<Eigen::Vector3d, 3>& worlds) {
  for (const auto& f : bearings) {
    if (std::abs(f.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("p3p_solve: bearings must be unit vectors");
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(bearings[i].dot(bearings[j])) > 1.0 - 1e-12) {
        throw std::invalid_argument("p3p_solve: degenerate bearings");
      }
    }
  }
  const double area =
      0.5 * (worlds[1] - worlds[0]).cross(worlds[2] - worlds[0]).norm();
  if (!(area > 1e-9)) {
    throw std::invalid_argument("p3p_solve: world points are collinear");
  }

  const double a = (worlds[1] - worlds[2]).norm();
  const double b = (worlds[0] - worlds[2]).norm();
  const double c = (worlds[0] - worlds[1]).norm();
  const double ca = bearings[1].dot(bearings[2]);
  const double cb = bearings[0].dot(bearings[2]);
  const double cg = bearings[0].dot(bearings[1]);
  const double p = 2 * ca, q = 2 * cb, r = 2 * cg;
  const double big_a = (a * a) / (b * b);
  const double big_c = (c * c) / (b * b);

  // Quartic in v = s3/s1 from eliminating u = s2/s1:
  //   P1(v)^2 - r*P1(v)*(r - p v) + (1 - C*w(v))*(r - p v)^2 = 0
  // with w(v) = 1 - q v + v^2 and P1(v) = (A - C) w(v) + 1 - v^2.
  const std::array<double, 3> w_poly{1.0, -q, 1.0};
  std::array<double, 3> p1{(big_a - big_c) * w_poly[0] + 1.0,
                           (big_a - big_c) * w_poly[1],
                           (big_a - big_c) * w_poly[2] - 1.0};
  const std::array<double, 2> lin{r, -p};
  const std::array<double, 3> one_minus_cw{1.0 - big_c, big_c * q, -big_c};

  auto quartic = detail::poly_mul(p1, p1);
  const auto term2 = detail::poly_mul(p1, lin);
  for (std::size_t i = 0; i < term2.size(); ++i) quartic[i] -= r * term2[i];
  const auto term3 = detail::poly_mul(one_minus_cw, detail::poly_mul(lin, lin));
  for (std::size_t i = 0; i < term3.size(); ++i) quartic[i] += term3[i];

  std::vector<Pose> solutions;
  for (double v : detail::real_roots({quartic.begin(), quartic.end()})) {
    if (v <= 0.0) continue;
    const double wv = 1.0 - q * v + v * v;
    if (wv <= 0.0) continue;
    double u;
    const double denom = r - p * v;
    if (std::abs(denom) > 1e-12) {
      u = ((big_a - big_c) * wv + 1.0 - v * v) / denom;
    } else {
      const double disc = r * r - 4.0 * (1.0 - big_c * wv);
      if (disc < 0.0) continue;
      u = 0.5 * (r + std::sqrt(disc));
    }
    if (u <= 0.0) continue;
    const double s1 = b / std::sqrt(wv);
    Eigen::Vector3d s(s1, u * s1, v * s1);
    if (!detail::refine_distances(s, ca, cb, cg, a, b, c)) continue;

    const std::array<Eigen::Vector3d, 3> camera_points{
        s[0] * bearings[0], s[1] * bearings[1], s[2] * bearings[2]};
    Pose pose = detail::kabsch(worlds, camera_points);

    // Keep only solutions that genuinely reproject onto the bearings.
    bool consistent = true;
    for (int i = 0; i < 3 && consistent; ++i) {
      const Eigen::Vector3d x = pose * worlds[i];
      const double angle =
          std::atan2(bearings[i].cross(x.normalized()).norm(),
                     bearings[i].dot(x.normalized()));
      if (!(x.norm() > 0.0) || angle > 1e-8) consistent = false;
    }
    if (!consistent) continue;

    bool duplicate = false;
    for (const Pose& other : solutions) {
      if ((other.R - pose.R).cwiseAbs().maxCoeff() < 1e-9 &&
          (other.t - pose.t).norm() < 1e-9 * std::max(1.0, pose.t.norm())) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) solutions.push_back(pose);
  }
  return solutions;
}

/// Matches partitioned by geometric verification. The three sets are
/// disjoint and together hold every match of the originating MatchSet.
struct LabeledMatches {
  MatchSet inliers;
  MatchSet outliers;
  MatchSet unlabeled;

  int total() const {
    return inliers.size() + outliers.size() + unlabeled.size();
  }
};

struct RansacResult {
  Pose pose;
  LabeledMatches labels;
  int iterations = 0;
};

namespace detail {

inline double reprojection_error(const Pose& pose, const CameraIntrinsics& k,
                                 const Eigen::Vector3d& world,
                                 const Eigen::Vector2d& pixel) {
  const auto projected = project(pose, k, world);
  if (!projected) return std::numeric_limits<double>::infinity();
  return (*projected - pixel).norm();
}

/// Gauss-Newton pose refinement minimizing total squared reprojection
/// error; at most `max_iters` iterations.
inline Pose refine_pose(const Pose& initial, const CameraIntrinsics& k,
                        const std::vector<Eigen::Vector3d>& worlds,
                        const std::vector<Eigen::Vector2d>& pixels,
                        int max_iters = 10) {
  Pose pose = initial;
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < worlds.size(); ++i) {
      const Eigen::Vector3d y = pose * worlds[i];
      if (y.z() <= 1e-6) continue;
      const double inv_z = 1.0 / y.z();
      Eigen::Matrix<double, 2, 3> d_proj;
      d_proj << k.fx * inv_z, 0, -k.fx * y.x() * inv_z * inv_z,
          0, k.fy * inv_z, -k.fy * y.y() * inv_z * inv_z;
      const Eigen::Vector3d rotated = y - pose.t;  // R * world
      Eigen::Matrix3d hat;
      hat << 0, -rotated.z(), rotated.y(), rotated.z(), 0, -rotated.x(),
          -rotated.y(), rotated.x(), 0;
      Eigen::Matrix<double, 2, 6> jac;
      jac.block<2, 3>(0, 0) = d_proj * (-hat);
      jac.block<2, 3>(0, 3) = d_proj;
      const Eigen::Vector2d residual(
          k.fx * y.x() * inv_z + k.cx - pixels[i].x(),
          k.fy * y.y() * inv_z + k.cy - pixels[i].y());
      h += jac.transpose() * jac;
      g += jac.transpose() * residual;
    }
    const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(-g);
    if (!delta.allFinite()) break;
    pose.R = rotation_exp(delta.head<3>()) * pose.R;
    pose.t += delta.tail<3>();
    if (delta.norm() < 1e-12) break;
  }
  pose.R = orthonormalized(pose.R);
  return pose;
}

}  // namespace detail

/// P3P RANSAC relative pose. points2d holds the pixel of every P1 point
/// (indexed by Match::idx1); points3d holds the camera-0-frame position of
/// every P0 point where depth was available (indexed by Match::idx0,
/// nullopt without depth). Matches without depth end up unlabeled.
/// Deterministic in `seed`.
inline RansacResult ransac_p3p(
    const std::vector<Eigen::Vector2d>& points2d,
    const std::vector<std::optional<Eigen::Vector3d>>& points3d,
    const MatchSet& matches, const CameraIntrinsics& k,
    double threshold_px = 2.0, int max_iters = 1000, std::uint64_t seed = 0,
    double confidence = 0.99) {
  RansacResult result;

  std::vector<int> usable;
  for (int m = 0; m < matches.size(); ++m) {
    const Match& match = matches.matches[m];
    if (match.idx0 < 0 ||
        match.idx0 >= static_cast<int>(points3d.size()) ||
        match.idx1 < 0 || match.idx1 >= static_cast<int>(points2d.size())) {
      throw std::invalid_argument("ransac_p3p: match index out of range");
    }
    if (points3d[match.idx0].has_value()) {
      usable.push_back(m);
    } else {
      result.labels.unlabeled.matches.push_back(match);
    }
  }
  const int n = static_cast<int>(usable.size());
  if (n < 4) {
    throw NumericalError("ransac_p3p: fewer than 4 usable matches");
  }

  std::vector<Eigen::Vector3d> world(n);
  std::vector<Eigen::Vector2d> pixel(n);
  std::vector<Eigen::Vector3d> bearing(n);
  for (int i = 0; i < n; ++i) {
    const Match& match = matches.matches[usable[i]];
    world[i] = *points3d[match.idx0];
    pixel[i] = points2d[match.idx1];
    bearing[i] = bearing_from_pixel(k, pixel[i]);
  }

  Rng rng(seed);
  Pose best_pose;
  int best_count = 0;
  int needed = max_iters;
  int it = 0;
  for (; it < max_iters && it < needed; ++it) {
    // 3 matches for the minimal solve + a 4th to disambiguate solutions.
    int sample[4];
    for (int s = 0; s < 4; ++s) {
      bool fresh;
      do {
        sample[s] = static_cast<int>(rng.uniform_int(n));
        fresh = true;
        for (int u = 0; u < s; ++u) fresh &= sample[u] != sample[s];
      } while (!fresh);
    }
    std::vector<Pose> candidates;
    try {
      candidates = p3p_solve(
          {bearing[sample[0]], bearing[sample[1]], bearing[sample[2]]},
          {world[sample[0]], world[sample[1]], world[sample[2]]});
    } catch (const std::invalid_argument&) {
      continue;  // degenerate minimal set, just a wasted hypothesis
    }
    if (candidates.empty()) continue;
    int best_candidate = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const double err = detail::reprojection_error(
          candidates[s], k, world[sample[3]], pixel[sample[3]]);
      if (err < best_err) {
        best_err = err;
        best_candidate = static_cast<int>(s);
      }
    }
    const Pose& pose = candidates[best_candidate];
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (detail::reprojection_error(pose, k, world[i], pixel[i]) <
          threshold_px) {
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_pose = pose;
      const double inlier_ratio = static_cast<double>(count) / n;
      const double fail = 1.0 - std::pow(inlier_ratio, 4);
      if (fail <= 0.0) {
        needed = it + 1;
      } else if (fail < 1.0) {
        needed = std::min<double>(
            max_iters,
            std::ceil(std::log(1.0 - confidence) / std::log(fail)));
      }
    }
  }
  result.iterations = it;
  if (best_count < 4) {
    throw NumericalError("ransac_p3p: no model with >= 4 inliers");
  }

  // Consensus of the best model defines the labels.
  std::vector<Eigen::Vector3d> inlier_worlds;
  std::vector<Eigen::Vector2d> inlier_pixels;
  std::vector<char> is_inlier(n, 0);
  for (int i = 0; i < n; ++i) {
    if (detail::reprojection_error(best_pose, k, world[i], pixel[i]) <
        threshold_px) {
      is_inlier[i] = 1;
      inlier_worlds.push_back(world[i]);
      inlier_pixels.push_back(pixel[i]);
      result.labels.inliers.matches.push_back(matches.matches[usable[i]]);
    } else {
      result.labels.outliers.matches.push_back(matches.matches[usable[i]]);
    }
  }

  Pose refined =
      detail::refine_pose(best_pose, k, inlier_worlds, inlier_pixels);
  int refined_count = 0;
  for (int i = 0; i < n; ++i) {
    if (detail::reprojection_error(refined, k, world[i], pixel[i]) <
        threshold_px) {
      ++refined_count;
    }
  }
  // The refit must not lose consensus; fall back to the raw model if it does.
  result.pose = refined_count >= best_count ? refined : best_pose;
  result.pose.R = orthonormalized(result.pose.R);
  return result;
}

/// Winner-take-all SAD block matching on a rectified pair with a
/// left-right consistency check (1 px tolerance). Depth = fx * baseline /
/// disparity; 0 marks invalid pixels.
inline DepthMap stereo_block_match(const GrayImage& left,
                                   const GrayImage& right, double baseline_m,
                                   const CameraIntrinsics& k, int block = 7,
                                   int max_disparity = 64) {
  if (!left.same_size(right)) {
    throw std::invalid_argument("stereo_block_match: image size mismatch");
  }
  if (block % 2 == 0 || block < 1) {
    throw std::invalid_argument("stereo_block_match: block must be odd");
  }
  const int half = block / 2;
  const int w = left.width();
  const int h = left.height();

  auto sad = [&](int xl, int xr, int y) {
    double acc = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        acc += std::abs(static_cast<double>(left.at(xl + dx, y + dy)) -
                        static_cast<double>(right.at(xr + dx, y + dy)));
      }
    }
    return acc;
  };

  Grid<int> disp_left(w, h, -1);
  Grid<int> disp_right(w, h, -1);
  for (int y = half; y < h - half; ++y) {
    for (int x = half; x < w - half; ++x) {
      {
        const int d_max = std::min(max_disparity, x - half);
        double best = std::numeric_limits<double>::infinity();
        for (int d = 0; d <= d_max; ++d) {
          const double cost = sad(x, x - d, y);
          if (cost < best) {
            best = cost;
            disp_left.at(x, y) = d;
          }
        }
      }
      {
        const int d_max = std::min(max_disparity, w - 1 - half - x);
        double best = std::numeric_limits<double>::infinity();
        for (int d = 0; d <= d_max; ++d) {
          const double cost = sad(x + d, x, y);
          if (cost < best) {
            best = cost;
            disp_right.at(x, y) = d;
          }
        }
      }
    }
  }

  DepthMap depth(w, h, 0.0f);
  for (int y = half; y < h - half; ++y) {
    for (int x = half; x < w - half; ++x) {
      const int d = disp_left.at(x, y);
      if (d <= 0) continue;  // zero disparity = infinitely far = invalid
      const int xr = x - d;
      const int d_r = disp_right.at(xr, y);
      if (d_r < 0 || std::abs(d_r - d) > 1) continue;
      depth.at(x, y) = static_cast<float>(k.fx * baseline_m / d);
    }
  }
  return depth;
}

/// Depth lookup helper: nullopt where the map marks invalid.
inline std::optional<double> depth_at(const DepthMap& depth, int x, int y) {
  if (x < 0 || x >= depth.width() || y < 0 || y >= depth.height()) {
    return std::nullopt;
  }
  const float d = depth.at(x, y);
  if (!(d > 0.0f)) return std::nullopt;
  return static_cast<double>(d);
}

}  // namespace sips
