#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "visreplay/features.hpp"
#include "visreplay/matching.hpp"

namespace visreplay {

/// Projective map of the plane, stored with the bottom-right entry fixed at 1.
template <typename Scalar>
struct Homography {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

  Mat3 matrix = Mat3::Identity();

  /// Scales `m` so that m(2,2) == 1; rejects maps that cannot be normalized
  /// or are singular afterwards.
  static std::optional<Homography> from_matrix(const Mat3& m) {
    if (!m.allFinite() || std::abs(m(2, 2)) < Scalar(1e-12)) return std::nullopt;
    Homography h;
    h.matrix = m / m(2, 2);
    if (!(std::abs(h.matrix.determinant()) > Scalar(1e-9))) return std::nullopt;
    return h;
  }

  Vec2 apply(const Vec2& p) const {
    const Eigen::Matrix<Scalar, 3, 1> q = matrix * p.homogeneous();
    return q.hnormalized();
  }

  /// Homogeneous w of the mapped point; positive in front of the camera.
  Scalar depth(const Vec2& p) const { return (matrix * p.homogeneous())(2); }
};

struct RansacOptions {
  int max_iterations = 2000;
  double confidence = 0.99;
  double inlier_threshold = 3.0;  // pixels, measured in the destination plane
  std::uint64_t seed = 0x5EED;
};

template <typename Scalar>
struct HomographyFit {
  Homography<Scalar> homography;
  std::vector<std::size_t> inliers;
};

namespace detail {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

// Similarity moving the centroid to the origin with mean distance sqrt(2).
template <typename Scalar, typename Pick>
Eigen::Matrix<Scalar, 3, 3> normalizer(std::size_t n, Pick pick) {
  Vec2<Scalar> c = Vec2<Scalar>::Zero();
  for (std::size_t i = 0; i < n; ++i) c += pick(i);
  c /= Scalar(n);
  Scalar mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += (pick(i) - c).norm();
  mean /= Scalar(n);
  const Scalar s = mean > Scalar(0) ? std::sqrt(Scalar(2)) / mean : Scalar(1);
  Eigen::Matrix<Scalar, 3, 3> t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

/// Uniform integer in [0, n) from raw engine output; the standard
/// distributions are implementation-defined, this is not.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = 0;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

template <typename Scalar>
bool collinear(const Vec2<Scalar>& a, const Vec2<Scalar>& b, const Vec2<Scalar>& c) {
  const Vec2<Scalar> u = b - a;
  const Vec2<Scalar> v = c - a;
  const Scalar cross = u.x() * v.y() - u.y() * v.x();
  return std::abs(cross) <= Scalar(1e-6) * (u.squaredNorm() + v.squaredNorm() + Scalar(1));
}

template <typename Scalar>
bool degenerate(const std::array<Vec2<Scalar>, 4>& p) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (collinear<Scalar>(p[i], p[j], p[k])) return true;
  return false;
}

}  // namespace detail

/// Normalized direct linear transform over the selected correspondences
/// (all of them when `subset` is empty).
template <typename Scalar>
std::optional<Homography<Scalar>> fit_homography_dlt(
    std::span<const Eigen::Matrix<Scalar, 2, 1>> from,
    std::span<const Eigen::Matrix<Scalar, 2, 1>> to,
    std::span<const std::size_t> subset = {}) {
  const std::size_t n = subset.empty() ? from.size() : subset.size();
  if (n < 4 || from.size() != to.size()) return std::nullopt;
  auto idx = [&](std::size_t i) { return subset.empty() ? i : subset[i]; };
  const auto tf = detail::normalizer<Scalar>(n, [&](std::size_t i) { return from[idx(i)]; });
  const auto tt = detail::normalizer<Scalar>(n, [&](std::size_t i) { return to[idx(i)]; });

  Eigen::Matrix<Scalar, Eigen::Dynamic, 9> a(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Matrix<Scalar, 3, 1> p = tf * from[idx(i)].homogeneous();
    const Eigen::Matrix<Scalar, 3, 1> q = tt * to[idx(i)].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << Scalar(0), Scalar(0), Scalar(0), -p.x(), -p.y(), -Scalar(1), q.y() * p.x(),
        q.y() * p.y(), q.y();
    a.row(r + 1) << p.x(), p.y(), Scalar(1), Scalar(0), Scalar(0), Scalar(0), -q.x() * p.x(),
        -q.x() * p.y(), -q.x();
  }
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<Scalar, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix<Scalar, 3, 3> hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography<Scalar>::from_matrix(tt.inverse() * hn * tf);
}

/// RANSAC over 4-point DLT hypotheses followed by a normalized-DLT refit on
/// the consensus set. Deterministic for a fixed seed.
template <typename Scalar>
std::optional<HomographyFit<Scalar>> estimate_homography(
    std::span<const Eigen::Matrix<Scalar, 2, 1>> from,
    std::span<const Eigen::Matrix<Scalar, 2, 1>> to, const RansacOptions& opts = {}) {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  const std::size_t n = from.size();
  if (n < 4 || to.size() != n) return std::nullopt;
  const auto thresh = static_cast<Scalar>(opts.inlier_threshold);

  auto consensus = [&](const Homography<Scalar>& h, Scalar& err) {
    std::vector<std::size_t> in;
    err = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(h.depth(from[i]) > Scalar(0))) continue;
      const Scalar e = (h.apply(from[i]) - to[i]).norm();
      if (e < thresh) {
        in.push_back(i);
        err += e;
      }
    }
    return in;
  };

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> best;
  Scalar best_err = std::numeric_limits<Scalar>::infinity();
  std::optional<Homography<Scalar>> best_h;
  long needed = opts.max_iterations;

  for (long it = 0; it < needed; ++it) {
    std::array<std::size_t, 4> pick{};
    for (int k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        pick[k] = detail::uniform_index(rng, n);
        fresh = std::find(pick.begin(), pick.begin() + k, pick[k]) == pick.begin() + k;
      }
    }
    std::array<Vec2, 4> pf{from[pick[0]], from[pick[1]], from[pick[2]], from[pick[3]]};
    std::array<Vec2, 4> pt{to[pick[0]], to[pick[1]], to[pick[2]], to[pick[3]]};
    if (detail::degenerate<Scalar>(pf) || detail::degenerate<Scalar>(pt)) continue;
    const auto h = fit_homography_dlt<Scalar>(from, to, pick);
    if (!h) continue;
    Scalar err = 0;
    auto in = consensus(*h, err);
    if (in.size() > best.size() || (in.size() == best.size() && err < best_err)) {
      best = std::move(in);
      best_err = err;
      best_h = h;
      const double w = static_cast<double>(best.size()) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(w, 4);
      if (miss <= 0) {
        needed = std::min<long>(needed, it + 1);
      } else {
        const double k = std::log(1.0 - opts.confidence) / std::log(miss);
        if (std::isfinite(k)) needed = std::min<long>(needed, static_cast<long>(std::ceil(k)));
      }
    }
  }
  if (!best_h || best.size() < 4) return std::nullopt;

  for (int round = 0; round < 3; ++round) {
    const auto refit = fit_homography_dlt<Scalar>(from, to, best);
    if (!refit) break;
    Scalar err = 0;
    auto in = consensus(*refit, err);
    if (in.size() < best.size()) break;
    const bool same = in == best;
    best = std::move(in);
    best_h = refit;
    if (same) break;
  }
  if (best.size() < 4) return std::nullopt;
  return HomographyFit<Scalar>{*best_h, std::move(best)};
}

/// RANSAC over keypoint correspondences (target plane -> source plane).
std::optional<HomographyFit<double>> estimate_homography(std::span<const MatchPair> matches,
                                                         const std::vector<Keypoint>& target,
                                                         const std::vector<Keypoint>& source,
                                                         const RansacOptions& opts = {});

/// Image of the rectangle (0,0)-(w-1,h-1) under `h`, clockwise from the
/// top-left corner.
template <typename Scalar>
std::array<Eigen::Matrix<Scalar, 2, 1>, 4> project_rectangle(const Homography<Scalar>& h,
                                                             Scalar w, Scalar hgt) {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  return {h.apply(Vec2(0, 0)), h.apply(Vec2(w - 1, 0)), h.apply(Vec2(w - 1, hgt - 1)),
          h.apply(Vec2(0, hgt - 1))};
}

template <typename Scalar>
bool is_convex(const std::array<Eigen::Matrix<Scalar, 2, 1>, 4>& q) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = q[i];
    const auto& b = q[(i + 1) % 4];
    const auto& c = q[(i + 2) % 4];
    const Scalar cross = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
    if (!(std::abs(cross) > Scalar(0))) return false;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

}  // namespace visreplay
