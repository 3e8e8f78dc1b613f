#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "visreplay/device.hpp"
#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"
#include "visreplay/ocr.hpp"
#include "visreplay/recorder.hpp"

/// Deterministic synthetic app screens for tests, demos and benchmarks.
/// Geometry is specified in density-independent units (dp) on a canvas
/// 360 dp wide; one dp is width / 360 pixels.
namespace visreplay::synth {

/// Portable seeded generator; the standard distributions are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
};

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

/// Rectangle in dp, half-open: [x0, x1) x [y0, y1).
struct DpRect {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;
};

class Canvas {
 public:
  Canvas(Resolution res, Color background);

  double scale() const { return scale_; }
  /// Canvas height in dp.
  double height_dp() const { return image_.height() / scale_; }

  /// Area-coverage antialiased fill.
  void fill(const DpRect& r, Color c);
  void frame(const DpRect& r, double thickness, Color c);
  /// Blocky pseudo-font, 7 cells tall and 6 cells per character. Returns the
  /// pixel box of the inked run for OCR fixtures.
  PixelBox text(double x, double y, std::string_view s, Color c, double cell = 1.5);
  /// Random blocks in `r`, each at most `max_block` dp on a side.
  void pattern(const DpRect& r, Rng& rng, double max_block);

  /// Inclusive pixel box covered by `r`.
  PixelBox pixels(const DpRect& r) const;

  const RasterImage& image() const { return image_; }

 private:
  RasterImage image_;
  double scale_;
};

/// Text width in dp for Canvas::text.
double text_width(std::string_view s, double cell = 1.5);

struct AppOptions {
  Resolution resolution{720, 1544};
  std::string serial = "SIM-0001";
  /// Seed for article titles, thumbnails and banner art. Sessions sharing it
  /// show the same content; a different seed models changed content on an
  /// unchanged layout.
  std::uint64_t content_seed = 1;
};

/// A news reader with home, search results, three section pages and four
/// article pages. Widget ids and transitions do not depend on the
/// resolution or the content seed.
SimulatedSession news_app(const AppOptions& opts = {});

/// Screens whose appearance depends on the content seed.
bool content_dependent(std::string_view screen);

/// Random walk over the session's regions (and the back key), yielding
/// events that all hit their intended widget.
std::vector<RecordEvent> random_walk(const SimulatedSession& session, std::size_t count,
                                     std::uint64_t seed);

/// Grid UI: `rows` x `cols` framed boxes in the given pixel geometry.
struct GridSpec {
  Resolution resolution{720, 1544};
  int rows = 3;
  int cols = 3;
  int left = 40;
  int top = 80;
  int box_w = 160;
  int box_h = 120;
  int col_gap = 40;
  int row_gap = 120;
};

RasterImage render_grid(const GridSpec& spec);
/// Pixel boxes of the grid cells, row-major.
std::vector<PixelBox> grid_boxes(const GridSpec& spec);

}  // namespace visreplay::synth
