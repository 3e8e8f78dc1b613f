#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "visreplay/candidates.hpp"
#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"
#include "visreplay/ocr.hpp"

namespace visreplay {

struct LayoutConfig {
  CannyOptions canny;
  /// Dilation radius in pixels on a screen `dilation_reference_width` wide;
  /// other widths scale it proportionally (at least 1 px when non-zero).
  int dilation_radius = 2;
  int dilation_reference_width = 1080;
  int dilation_for(int screen_width) const;
  /// R1: drop boxes narrower AND shorter than this fraction of screen width.
  double min_side = 0.02;
  /// R2: nested boxes survive when either side reaches this fraction of screen width.
  double keep_nested = 0.60;
  /// R3: drop boxes smaller than this fraction of the screen area.
  double min_area = 0.01;
  /// Vertical gap, as a fraction of screen height, that starts a new group.
  double group_gap = 0.05;
  /// Shared vertical extent, relative to the smaller height, that joins a line.
  double line_overlap = 0.5;
  double text_similarity = 0.8;

  /// Throws ConfigError naming the first field out of range.
  void validate() const;
};

/// Group / line / column address of a widget.
struct LayoutTuple {
  int group = 0;
  int line = 0;
  int column = 0;

  friend auto operator<=>(const LayoutTuple&, const LayoutTuple&) = default;
};

struct LayoutEntry {
  PixelBox box;
  LayoutTuple tuple;
  std::string text;

  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

/// Entries are kept sorted by tuple; tuples are unique.
struct LayoutMap {
  Resolution resolution;
  std::vector<LayoutEntry> entries;

  bool empty() const { return entries.empty(); }
  const LayoutEntry* find(const LayoutTuple& t) const;

  friend bool operator==(const LayoutMap&, const LayoutMap&) = default;
};

/// Canny, dilation and connected components, followed by the size rule (R1),
/// the nesting rule (R2) and the area rule (R3), applied in that order.
std::vector<PixelBox> extract_widget_boxes(const GrayImage& screen, const LayoutConfig& cfg = {});

/// Individual filter stages, exposed for testing.
std::vector<PixelBox> drop_small_sides(std::span<const PixelBox> boxes, Resolution res,
                                       const LayoutConfig& cfg = {});
std::vector<PixelBox> drop_nested(std::span<const PixelBox> boxes, Resolution res,
                                  const LayoutConfig& cfg = {});
std::vector<PixelBox> drop_small_areas(std::span<const PixelBox> boxes, Resolution res,
                                       const LayoutConfig& cfg = {});

LayoutMap characterize(std::span<const PixelBox> boxes, Resolution res, const LayoutConfig& cfg = {});

/// Full pipeline on a screenshot. When `ocr` is given, each entry receives
/// the text of the OCR regions centered inside it.
LayoutMap analyze_screen(const RasterImage& screen, const LayoutConfig& cfg = {},
                         const OcrEngine* ocr = nullptr);

void attach_text(LayoutMap& layout, std::span<const TextRegion> regions);

/// Smallest entry containing the point; otherwise the nearest center. Ties go
/// to the lowest tuple.
std::optional<LayoutEntry> tuple_of_point(const LayoutMap& layout, RelPoint p);

/// Entry at `recorded`, clamped group-first to the nearest existing address.
/// When `recorded_text` is non-empty and the layout carries text, an entry of
/// the same group whose text matches better than the configured threshold is
/// preferred over a clamped or mismatching one.
std::optional<CandidateBox> locate_by_tuple(const LayoutMap& replay, const LayoutTuple& recorded,
                                            std::string_view recorded_text = {},
                                            const LayoutConfig& cfg = {});

std::string layout_to_xml(const LayoutMap& layout);
LayoutMap layout_from_xml(std::string_view xml_text);

}  // namespace visreplay
