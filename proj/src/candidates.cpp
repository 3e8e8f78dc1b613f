#include "visreplay/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <Eigen/Geometry>
#include <fmt/format.h>

#include "visreplay/matching.hpp"
#include "xml_io.hpp"

namespace visreplay {

std::optional<HomographyFit<double>> estimate_homography(std::span<const MatchPair> matches,
                                                         const std::vector<Keypoint>& target,
                                                         const std::vector<Keypoint>& source,
                                                         const RansacOptions& opts) {
  std::vector<Eigen::Vector2d> from;
  std::vector<Eigen::Vector2d> to;
  from.reserve(matches.size());
  to.reserve(matches.size());
  for (const MatchPair& m : matches) {
    from.emplace_back(target[m.target_index].x, target[m.target_index].y);
    to.emplace_back(source[m.source_index].x, source[m.source_index].y);
  }
  return estimate_homography<double>(std::span<const Eigen::Vector2d>(from),
                                     std::span<const Eigen::Vector2d>(to), opts);
}

namespace {

struct Correspondence {
  Eigen::Vector2d target;
  Eigen::Vector2d source;
  double scale = 1;  // source over target keypoint scale
  double turn = 0;   // source minus target orientation
};

Correspondence correspond(const Keypoint& t, const Keypoint& s) {
  return {{t.x, t.y}, {s.x, s.y}, s.scale / t.scale, s.orientation - t.orientation};
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

PixelBox clamp_box(double x0, double y0, double x1, double y1, Resolution screen) {
  auto cx = [&](double v) {
    return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(screen.width - 1)));
  };
  auto cy = [&](double v) {
    return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(screen.height - 1)));
  };
  return {cx(x0), cy(y0), cx(x1), cy(y1)};
}

// Groups correspondences whose source points fall in 8-connected occupied
// grid cells. Clusters are returned in order of their first member.
std::vector<std::vector<std::size_t>> grid_clusters(const std::vector<Correspondence>& corr,
                                                    double cell) {
  std::map<std::pair<long, long>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const auto key = std::make_pair(static_cast<long>(std::floor(corr[i].source.x() / cell)),
                                    static_cast<long>(std::floor(corr[i].source.y() / cell)));
    cells[key].push_back(i);
  }
  std::map<std::pair<long, long>, int> label;
  std::vector<std::vector<std::size_t>> clusters;
  for (const auto& [key, members] : cells) {
    if (label.count(key)) continue;
    const int id = static_cast<int>(clusters.size());
    clusters.emplace_back();
    std::vector<std::pair<long, long>> stack{key};
    label[key] = id;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      const auto& m = cells.at(k);
      clusters[id].insert(clusters[id].end(), m.begin(), m.end());
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const std::pair<long, long> n{k.first + dx, k.second + dy};
          if (cells.count(n) && !label.count(n)) {
            label[n] = id;
            stack.push_back(n);
          }
        }
      }
    }
  }
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

}  // namespace

std::vector<CandidateBox> locate_candidates(const FeatureSet& widget, Resolution widget_size,
                                            const FeatureSet& screen, Resolution screen_size,
                                            const MatchConfig& cfg) {
  std::vector<CandidateBox> out;
  if (widget.empty() || screen.size() < 2) return out;

  const auto all = knn_match(widget, screen);
  const auto pairs = ratio_filter(all, cfg.delta);

  // Exact repeats (tied zero distances) vote for both copies.
  std::vector<Correspondence> corr;
  for (const MatchPair& p : pairs) {
    const Keypoint& t = widget.keypoints[p.target_index];
    const Keypoint& s = screen.keypoints[p.source_index];
    corr.push_back(correspond(t, s));
    if (p.d_second_min == p.d_min && p.second_index != p.source_index) {
      corr.push_back(correspond(t, screen.keypoints[p.second_index]));
    }
  }

  // A widget shown several times matches each copy about equally well, which
  // the ratio test rejects. Such a target keeps its m nearest sources when
  // they lie at distinct sites and the next nearest is clearly worse; m = 1
  // is the ordinary test.
  if (cfg.max_repeats > 1) {
    const double sep = 0.5 * std::min(widget_size.width, widget_size.height);
    auto apart = [&](std::size_t a, std::size_t b) {
      const Keypoint& p = screen.keypoints[a];
      const Keypoint& q = screen.keypoints[b];
      return std::hypot(p.x - q.x, p.y - q.y) >= sep;
    };
    std::vector<bool> kept(widget.size(), false);
    for (const MatchPair& p : pairs) kept[p.target_index] = true;
    std::optional<KdTree> tree;
    for (const MatchPair& p : all) {
      if (kept[p.target_index] || !apart(p.source_index, p.second_index)) continue;
      if (!tree) tree.emplace(screen.descriptors);
      const auto nn = tree->nearest(
          widget.descriptors.row(static_cast<Eigen::Index>(p.target_index)).data(),
          cfg.max_repeats + 1);
      for (std::size_t m = 2; m < nn.size(); ++m) {
        bool fresh = true;
        for (std::size_t j = 0; j + 1 < m; ++j) fresh = fresh && apart(nn[j].index, nn[m - 1].index);
        if (!fresh) break;
        if (nn[m - 1].distance < cfg.delta * nn[m].distance) {
          const Keypoint& t = widget.keypoints[p.target_index];
          for (std::size_t j = 0; j < m; ++j) corr.push_back(correspond(t, screen.keypoints[nn[j].index]));
          break;
        }
      }
    }
  }
  const std::size_t smallest = std::min(cfg.min_matches, cfg.min_votes);
  if (corr.size() < smallest) return out;

  const double w = widget_size.width;
  const double h = widget_size.height;
  const double cell = std::max(1.0, std::hypot(w, h));
  const auto total = static_cast<double>(corr.size());

  // Accepts a fitted model as a candidate box when the projected widget is
  // plausible: in front of the camera, convex, of comparable area and on screen.
  auto place = [&](const HomographyFit<double>& fit) -> std::optional<CandidateBox> {
    const auto& hom = fit.homography;
    const auto quad = project_rectangle<double>(hom, w, h);
    for (const Eigen::Vector2d& c : {Eigen::Vector2d(0, 0), Eigen::Vector2d(w - 1, 0),
                                     Eigen::Vector2d(w - 1, h - 1), Eigen::Vector2d(0, h - 1)}) {
      if (!(hom.depth(c) > 0)) return std::nullopt;
    }
    double area = 0;
    for (int i = 0; i < 4; ++i) {
      area += quad[i].x() * quad[(i + 1) % 4].y() - quad[(i + 1) % 4].x() * quad[i].y();
    }
    const double ratio = std::abs(area) / 2 / std::max(1.0, (w - 1) * (h - 1));
    if (!is_convex<double>(quad) || ratio > cfg.max_area_ratio || ratio < 1.0 / cfg.max_area_ratio) {
      return std::nullopt;
    }
    double x0 = quad[0].x(), x1 = x0, y0 = quad[0].y(), y1 = y0;
    for (const auto& q : quad) {
      x0 = std::min(x0, q.x());
      x1 = std::max(x1, q.x());
      y0 = std::min(y0, q.y());
      y1 = std::max(y1, q.y());
    }
    if (x1 < 0 || y1 < 0 || x0 > screen_size.width - 1 || y0 > screen_size.height - 1) {
      return std::nullopt;
    }
    return CandidateBox{clamp_box(x0, y0, x1, y1, screen_size),
                        static_cast<double>(fit.inliers.size()) / total, fit.inliers.size(), true};
  };

  for (const auto& cluster : grid_clusters(corr, cell)) {
    if (cluster.size() < smallest) continue;
    std::vector<Eigen::Vector2d> from;
    std::vector<Eigen::Vector2d> to;
    for (std::size_t i : cluster) {
      from.push_back(corr[i].target);
      to.push_back(corr[i].source);
    }

    // Repeated instances of a widget share one cluster; peel off one model
    // at a time until the remaining matches no longer support another.
    bool placed = false;
    while (from.size() >= cfg.min_matches) {
      auto fit = estimate_homography<double>(std::span<const Eigen::Vector2d>(from),
                                             std::span<const Eigen::Vector2d>(to), cfg.ransac);
      if (!fit || fit->inliers.size() < cfg.min_inliers) break;
      if (auto c = place(*fit)) {
        out.push_back(*c);
        placed = true;
      }
      std::vector<bool> used(from.size(), false);
      for (std::size_t i : fit->inliers) used[i] = true;
      std::vector<Eigen::Vector2d> rest_from;
      std::vector<Eigen::Vector2d> rest_to;
      for (std::size_t i = 0; i < from.size(); ++i) {
        if (used[i]) continue;
        rest_from.push_back(from[i]);
        rest_to.push_back(to[i]);
      }
      from = std::move(rest_from);
      to = std::move(rest_to);
    }
    if (!placed) {
      // Each match predicts the widget center and size from its keypoint
      // scale and orientation; the median prediction is kept.
      const Eigen::Vector2d mid((w - 1) / 2, (h - 1) / 2);
      std::vector<double> xs, ys, scales;
      for (std::size_t i : cluster) {
        const Correspondence& m = corr[i];
        const Eigen::Vector2d c =
            m.source + m.scale * (Eigen::Rotation2Dd(m.turn) * (mid - m.target));
        xs.push_back(c.x());
        ys.push_back(c.y());
        scales.push_back(m.scale);
      }
      const double cx = median(xs), cy = median(ys);
      if (cluster.size() < cfg.min_matches) {
        std::set<std::pair<double, double>> sites;
        bool agree = true;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          agree = agree && std::hypot(xs[i] - cx, ys[i] - cy) <= 0.1 * cell;
          sites.emplace(corr[cluster[i]].source.x(), corr[cluster[i]].source.y());
        }
        if (!agree || sites.size() < cfg.min_votes) continue;
      }
      const double hw = median(scales) * mid.x(), hh = median(scales) * mid.y();
      out.push_back({clamp_box(cx - hw, cy - hh, cx + hw, cy + hh, screen_size),
                     0.5 * static_cast<double>(cluster.size()) / total, cluster.size(), false});
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const CandidateBox& a, const CandidateBox& b) {
    return std::make_tuple(-a.score, -static_cast<long>(a.support), a.box.y0, a.box.x0) <
           std::make_tuple(-b.score, -static_cast<long>(b.support), b.box.y0, b.box.x0);
  });
  return out;
}

std::vector<CandidateBox> locate_candidates(const GrayImage& widget, const GrayImage& screen,
                                            const MatchConfig& cfg) {
  return locate_candidates(extract_features(widget, cfg.sift), resolution_of(widget),
                           extract_features(screen, cfg.sift), resolution_of(screen), cfg);
}

std::string candidates_to_xml(const std::vector<CandidateBox>& candidates,
                              Resolution widget_size, Resolution screen_size) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("candidates", xml::Tree{});
  xml::set_attr(root, "widget_w", widget_size.width);
  xml::set_attr(root, "widget_h", widget_size.height);
  xml::set_attr(root, "screen_w", screen_size.width);
  xml::set_attr(root, "screen_h", screen_size.height);
  for (const auto& c : candidates) {
    xml::Tree& n = root.add_child("candidate", xml::Tree{});
    xml::set_attr(n, "x0", c.box.x0);
    xml::set_attr(n, "y0", c.box.y0);
    xml::set_attr(n, "x1", c.box.x1);
    xml::set_attr(n, "y1", c.box.y1);
    xml::set_attr(n, "score", fmt::format("{:.6f}", c.score));
    xml::set_attr(n, "support", c.support);
    xml::set_attr(n, "homography", c.from_homography ? 1 : 0);
  }
  return xml::to_string(doc);
}

}  // namespace visreplay
