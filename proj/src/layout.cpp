#include "visreplay/layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

void LayoutConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(fmt::format("{} must lie in [0, 1], got {}", name, v));
    }
  };
  if (!(canny.low >= 0 && canny.high >= canny.low)) {
    throw ConfigError(fmt::format("canny thresholds must satisfy 0 <= low <= high, got {} / {}",
                                  canny.low, canny.high));
  }
  if (!(canny.sigma > 0)) throw ConfigError(fmt::format("canny sigma must be > 0, got {}", canny.sigma));
  if (dilation_radius < 0 || dilation_radius > 32) {
    throw ConfigError(fmt::format("dilation radius must lie in [0, 32], got {}", dilation_radius));
  }
  if (dilation_reference_width < 1) {
    throw ConfigError(fmt::format("dilation reference width must be positive, got {}",
                                  dilation_reference_width));
  }
  fraction(min_side, "min_side");
  fraction(keep_nested, "keep_nested");
  fraction(min_area, "min_area");
  fraction(group_gap, "group_gap");
  fraction(line_overlap, "line_overlap");
  fraction(text_similarity, "text_similarity");
}

int LayoutConfig::dilation_for(int screen_width) const {
  if (dilation_radius == 0) return 0;
  const long r = std::lround(static_cast<double>(dilation_radius) * screen_width /
                             dilation_reference_width);
  return static_cast<int>(std::max(1L, r));
}

const LayoutEntry* LayoutMap::find(const LayoutTuple& t) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), t,
                             [](const LayoutEntry& e, const LayoutTuple& k) { return e.tuple < k; });
  return (it != entries.end() && it->tuple == t) ? &*it : nullptr;
}

std::vector<PixelBox> drop_small_sides(std::span<const PixelBox> boxes, Resolution res,
                                       const LayoutConfig& cfg) {
  const double limit = cfg.min_side * res.width;
  std::vector<PixelBox> out;
  for (const auto& b : boxes) {
    if (b.width() < limit && b.height() < limit) continue;
    out.push_back(b);
  }
  return out;
}

std::vector<PixelBox> drop_nested(std::span<const PixelBox> boxes, Resolution res,
                                  const LayoutConfig& cfg) {
  const double keep = cfg.keep_nested * res.width;
  std::vector<PixelBox> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const PixelBox& b = boxes[i];
    bool nested = false;
    for (std::size_t j = 0; j < boxes.size() && !nested; ++j) {
      if (j == i || !boxes[j].contains(b)) continue;
      // Of two identical boxes the later one counts as the inner.
      nested = boxes[j] != b || j < i;
    }
    if (nested && b.width() < keep && b.height() < keep) continue;
    out.push_back(b);
  }
  return out;
}

std::vector<PixelBox> drop_small_areas(std::span<const PixelBox> boxes, Resolution res,
                                       const LayoutConfig& cfg) {
  const double limit = cfg.min_area * static_cast<double>(res.width) * res.height;
  std::vector<PixelBox> out;
  for (const auto& b : boxes) {
    if (static_cast<double>(b.area()) < limit) continue;
    out.push_back(b);
  }
  return out;
}

std::vector<PixelBox> extract_widget_boxes(const GrayImage& screen, const LayoutConfig& cfg) {
  const Resolution res = resolution_of(screen);
  const EdgeMap edges =
      dilate(canny(screen, cfg.canny), cfg.dilation_for(static_cast<int>(screen.cols())));
  std::vector<PixelBox> boxes;
  for (const auto& c : find_contours(edges)) boxes.push_back(c.box);
  boxes = drop_small_sides(boxes, res, cfg);
  boxes = drop_nested(boxes, res, cfg);
  return drop_small_areas(boxes, res, cfg);
}

LayoutMap characterize(std::span<const PixelBox> input, Resolution res, const LayoutConfig& cfg) {
  LayoutMap out{res, {}};
  std::vector<PixelBox> boxes(input.begin(), input.end());
  auto key = [](const PixelBox& b) { return std::tie(b.y0, b.x0, b.y1, b.x1); };
  std::sort(boxes.begin(), boxes.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });

  const double gap = cfg.group_gap * res.height;
  std::vector<std::vector<PixelBox>> groups;
  int bottom = 0;
  for (const auto& b : boxes) {
    if (groups.empty() || b.y0 - bottom > gap) {
      groups.emplace_back();
      bottom = b.y1;
    }
    groups.back().push_back(b);
    bottom = std::max(bottom, b.y1);
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::vector<PixelBox>> lines;
    for (const auto& b : groups[g]) {
      auto joins = [&](const std::vector<PixelBox>& line) {
        return std::any_of(line.begin(), line.end(), [&](const PixelBox& m) {
          const int shared = std::min(m.y1, b.y1) - std::max(m.y0, b.y0) + 1;
          return shared > 0 && shared >= cfg.line_overlap * std::min(m.height(), b.height());
        });
      };
      auto it = std::find_if(lines.begin(), lines.end(), joins);
      if (it == lines.end()) {
        lines.push_back({b});
      } else {
        it->push_back(b);
      }
    }
    // Members were appended in top-edge order, so front() is each line's top.
    std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) {
      return a.front().y0 < b.front().y0;
    });
    for (std::size_t l = 0; l < lines.size(); ++l) {
      auto& line = lines[l];
      std::stable_sort(line.begin(), line.end(), [](const PixelBox& a, const PixelBox& b) {
        return std::tie(a.x0, a.y0, a.x1, a.y1) < std::tie(b.x0, b.y0, b.x1, b.y1);
      });
      for (std::size_t c = 0; c < line.size(); ++c) {
        out.entries.push_back(
            {line[c], {static_cast<int>(g), static_cast<int>(l), static_cast<int>(c)}, {}});
      }
    }
  }
  return out;
}

namespace {

// Index of the smallest entry containing (x, y), lowest tuple on ties.
std::optional<std::size_t> smallest_containing(const LayoutMap& layout, double x, double y) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < layout.entries.size(); ++i) {
    const PixelBox& b = layout.entries[i].box;
    if (!b.contains(x, y)) continue;
    if (!best || b.area() < layout.entries[*best].box.area()) best = i;
  }
  return best;
}

}  // namespace

void attach_text(LayoutMap& layout, std::span<const TextRegion> regions) {
  std::vector<std::vector<const TextRegion*>> owned(layout.entries.size());
  for (const auto& r : regions) {
    const auto c = r.box.center();
    if (auto i = smallest_containing(layout, c.x(), c.y())) owned[*i].push_back(&r);
  }
  for (std::size_t i = 0; i < owned.size(); ++i) {
    auto& list = owned[i];
    std::stable_sort(list.begin(), list.end(), [](const TextRegion* a, const TextRegion* b) {
      return std::tie(a->box.y0, a->box.x0) < std::tie(b->box.y0, b->box.x0);
    });
    std::string text;
    for (const auto* r : list) {
      if (!text.empty()) text += ' ';
      text += r->text;
    }
    layout.entries[i].text = std::move(text);
  }
}

LayoutMap analyze_screen(const RasterImage& screen, const LayoutConfig& cfg, const OcrEngine* ocr) {
  const auto boxes = extract_widget_boxes(to_grayscale(screen), cfg);
  LayoutMap layout = characterize(boxes, screen.resolution(), cfg);
  if (ocr) attach_text(layout, ocr->extract(screen));
  return layout;
}

std::optional<LayoutEntry> tuple_of_point(const LayoutMap& layout, RelPoint p) {
  if (layout.empty()) return std::nullopt;
  const double x = p.x * layout.resolution.width;
  const double y = p.y * layout.resolution.height;
  if (auto i = smallest_containing(layout, x, y)) return layout.entries[*i];
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < layout.entries.size(); ++i) {
    const auto c = layout.entries[i].box.center();
    const double d = std::hypot(c.x() - x, c.y() - y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return layout.entries[best];
}

namespace {

// Among `values` (ascending, possibly repeated), the one nearest `want`;
// lower wins ties.
int nearest_value(const std::vector<int>& values, int want) {
  int best = values.front();
  for (int v : values) {
    if (std::abs(v - want) < std::abs(best - want)) best = v;
  }
  return best;
}

}  // namespace

std::optional<CandidateBox> locate_by_tuple(const LayoutMap& replay, const LayoutTuple& recorded,
                                            std::string_view recorded_text,
                                            const LayoutConfig& cfg) {
  if (replay.empty()) return std::nullopt;
  const auto& es = replay.entries;

  const LayoutEntry* chosen = replay.find(recorded);
  if (!chosen) {
    std::vector<int> vals;
    for (const auto& e : es) vals.push_back(e.tuple.group);
    const int g = nearest_value(vals, recorded.group);
    vals.clear();
    for (const auto& e : es) {
      if (e.tuple.group == g) vals.push_back(e.tuple.line);
    }
    const int l = nearest_value(vals, recorded.line);
    vals.clear();
    for (const auto& e : es) {
      if (e.tuple.group == g && e.tuple.line == l) vals.push_back(e.tuple.column);
    }
    chosen = replay.find({g, l, nearest_value(vals, recorded.column)});
  }

  const bool has_text =
      std::any_of(es.begin(), es.end(), [](const LayoutEntry& e) { return !e.text.empty(); });
  if (!recorded_text.empty() && has_text &&
      text_similarity(chosen->text, recorded_text) < cfg.text_similarity) {
    const LayoutEntry* best = nullptr;
    double best_s = cfg.text_similarity;
    for (const auto& e : es) {
      if (e.tuple.group != chosen->tuple.group || e.text.empty()) continue;
      const double s = text_similarity(e.text, recorded_text);
      if (s >= best_s && (!best || s > best_s)) {
        best = &e;
        best_s = s;
      }
    }
    if (best) chosen = best;
  }
  return CandidateBox{chosen->box, 1.0, 1, false};
}

std::string layout_to_xml(const LayoutMap& layout) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("layout", xml::Tree{});
  xml::set_attr(root, "w", layout.resolution.width);
  xml::set_attr(root, "h", layout.resolution.height);
  for (const auto& e : layout.entries) {
    xml::Tree& n = root.add_child("widget", xml::Tree{});
    xml::set_attr(n, "g", e.tuple.group);
    xml::set_attr(n, "l", e.tuple.line);
    xml::set_attr(n, "c", e.tuple.column);
    xml::set_attr(n, "x0", e.box.x0);
    xml::set_attr(n, "y0", e.box.y0);
    xml::set_attr(n, "x1", e.box.x1);
    xml::set_attr(n, "y1", e.box.y1);
    xml::set_attr(n, "text", e.text);
  }
  return xml::to_string(doc);
}

LayoutMap layout_from_xml(std::string_view xml_text) {
  const std::string where = "layout";
  const xml::Tree doc = xml::read_string(std::string(xml_text));
  const xml::Tree& root = xml::child(doc, "layout", where);
  LayoutMap out;
  out.resolution = {xml::attr_as<int>(root, "w", where), xml::attr_as<int>(root, "h", where)};
  for (const auto& [name, n] : root) {
    if (name != "widget") continue;
    LayoutEntry e;
    e.tuple = {xml::attr_as<int>(n, "g", where), xml::attr_as<int>(n, "l", where),
               xml::attr_as<int>(n, "c", where)};
    e.box = {xml::attr_as<int>(n, "x0", where), xml::attr_as<int>(n, "y0", where),
             xml::attr_as<int>(n, "x1", where), xml::attr_as<int>(n, "y1", where)};
    e.text = xml::maybe_attr(n, "text").value_or("");
    out.entries.push_back(std::move(e));
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const auto& a, const auto& b) { return a.tuple < b.tuple; });
  for (std::size_t i = 1; i < out.entries.size(); ++i) {
    if (out.entries[i].tuple == out.entries[i - 1].tuple) {
      throw Error(fmt::format("layout: duplicate tuple ({},{},{})", out.entries[i].tuple.group,
                              out.entries[i].tuple.line, out.entries[i].tuple.column));
    }
  }
  return out;
}

}  // namespace visreplay
