#include "visreplay/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "visreplay/error.hpp"

namespace visreplay::synth {

Rng::Rng(std::uint64_t seed) : state_(seed) {}

// splitmix64
std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("Rng::index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n));
}

Canvas::Canvas(Resolution res, Color bg)
    : image_(res.width, res.height, Rgba{bg.r, bg.g, bg.b, 255}), scale_(res.width / 360.0) {}

void Canvas::fill(const DpRect& r, Color c) {
  const double x0 = r.x0 * scale_;
  const double x1 = r.x1 * scale_;
  const double y0 = r.y0 * scale_;
  const double y1 = r.y1 * scale_;
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int ix1 = std::min(image_.width(), static_cast<int>(std::ceil(x1)));
  const int iy1 = std::min(image_.height(), static_cast<int>(std::ceil(y1)));
  for (int y = iy0; y < iy1; ++y) {
    const double cy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
    for (int x = ix0; x < ix1; ++x) {
      const double cov = cy * (std::min<double>(x + 1, x1) - std::max<double>(x, x0));
      if (cov <= 0) continue;
      const Rgba old = image_.at(x, y);
      auto mix = [cov](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(a * (1 - cov) + b * cov));
      };
      image_.set(x, y, Rgba{mix(old.r, c.r), mix(old.g, c.g), mix(old.b, c.b), 255});
    }
  }
}

void Canvas::frame(const DpRect& r, double t, Color c) {
  fill({r.x0, r.y0, r.x1, r.y0 + t}, c);
  fill({r.x0, r.y1 - t, r.x1, r.y1}, c);
  fill({r.x0, r.y0 + t, r.x0 + t, r.y1 - t}, c);
  fill({r.x1 - t, r.y0 + t, r.x1, r.y1 - t}, c);
}

namespace {

// 5x7 glyph bits derived from the character code; never blank, with the
// outer columns inked so adjacent glyphs read as one word.
std::array<std::uint8_t, 7> glyph(char ch) {
  std::uint64_t h = 1469598103934665603ULL;
  h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
  h ^= h >> 29;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 32;
  std::array<std::uint8_t, 7> rows{};
  for (int r = 0; r < 7; ++r) {
    rows[r] = static_cast<std::uint8_t>((h >> (5 * r)) & 0x1F);
  }
  rows[0] |= 0x11;
  rows[6] |= 0x1F;
  return rows;
}

}  // namespace

double text_width(std::string_view s, double cell) {
  return s.empty() ? 0.0 : (6.0 * static_cast<double>(s.size()) - 1.0) * cell;
}

PixelBox Canvas::text(double x, double y, std::string_view s, Color c, double cell) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ' ') continue;
    const auto rows = glyph(s[i]);
    const double gx = x + 6.0 * cell * static_cast<double>(i);
    for (int r = 0; r < 7; ++r) {
      for (int b = 0; b < 5; ++b) {
        if (rows[r] >> (4 - b) & 1) {
          fill({gx + b * cell, y + r * cell, gx + (b + 1) * cell, y + (r + 1) * cell}, c);
        }
      }
    }
  }
  return pixels({x, y, x + text_width(s, cell), y + 7 * cell});
}

void Canvas::pattern(const DpRect& r, Rng& rng, double max_block) {
  const int n = 6 + static_cast<int>(rng.index(6));
  for (int i = 0; i < n; ++i) {
    const double w = rng.uniform(0.3, 1.0) * std::min(max_block, r.x1 - r.x0);
    const double h = rng.uniform(0.3, 1.0) * std::min(max_block, r.y1 - r.y0);
    const double x = rng.uniform(r.x0, r.x1 - w);
    const double y = rng.uniform(r.y0, r.y1 - h);
    fill({x, y, x + w, y + h},
         Color{static_cast<std::uint8_t>(rng.index(200)), static_cast<std::uint8_t>(rng.index(200)),
               static_cast<std::uint8_t>(rng.index(200))});
  }
}

PixelBox Canvas::pixels(const DpRect& r) const {
  const int x0 = std::clamp(static_cast<int>(std::floor(r.x0 * scale_)), 0, image_.width() - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(r.y0 * scale_)), 0, image_.height() - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(r.x1 * scale_)) - 1, x0, image_.width() - 1);
  const int y1 = std::clamp(static_cast<int>(std::ceil(r.y1 * scale_)) - 1, y0, image_.height() - 1);
  return {x0, y0, x1, y1};
}

// ---------------------------------------------------------------------------
// News reader

namespace {

constexpr Color kWhite{255, 255, 255};
constexpr Color kInk{30, 30, 40};
constexpr Color kBorder{110, 110, 120};
constexpr Color kAccent{20, 90, 170};
constexpr Color kMuted{90, 90, 100};

constexpr std::array<const char*, 3> kTabs = {"Top", "Local", "World"};
constexpr std::array<const char*, 4> kNav = {"Home", "Top", "Local", "World"};
constexpr int kCards = 4;
constexpr int kResults = 5;

struct Builder {
  Canvas canvas;
  Screen screen;

  Builder(Resolution res, std::string name) : canvas(res, kWhite) { screen.name = std::move(name); }

  double w() const { return 360.0; }
  double h() const { return canvas.height_dp(); }

  void label(double x, double y, std::string_view s, Color c = kInk, double cell = 1.5) {
    if (s.empty()) return;
    screen.text.push_back({canvas.text(x, y, s, c, cell), std::string(s), 1.0});
  }
  void region(const DpRect& r, std::string op, std::string target, std::string id) {
    screen.regions.push_back({canvas.pixels(r), std::move(op), std::move(target), std::move(id)});
  }
  void button(const DpRect& r, std::string_view text, std::string op, std::string target,
              std::string id) {
    canvas.frame(r, 1.5, kBorder);
    const double tw = text_width(text);
    label((r.x0 + r.x1 - tw) / 2, (r.y0 + r.y1) / 2 - 5.25, text);
    region(r, std::move(op), std::move(target), std::move(id));
  }
  void app_bar(std::string_view title) {
    canvas.fill({0, 0, w(), 48}, kAccent);
    label(16, 18.75, title, kWhite);
  }
  void back_button() { button({8, 56, 88, 100}, "Back", "tap", "home", screen.name + "_back"); }

  Screen finish() {
    screen.image = canvas.image();
    return std::move(screen);
  }
};

// Pseudo-words of 4 to 6 letters, so that new content rarely repeats text
// shown elsewhere on screen.
std::string headline(Rng& rng, int words) {
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    const std::size_t n = 4 + rng.index(3);
    for (std::size_t k = 0; k < n; ++k) s += static_cast<char>('a' + rng.index(26));
  }
  return s;
}

struct Content {
  std::vector<std::string> titles;
  std::vector<std::uint64_t> art;
  std::string banner;
  std::uint64_t banner_art = 0;
};

Content make_content(std::uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  Content c;
  for (int i = 0; i < kCards; ++i) {
    c.titles.push_back(headline(rng, 2));
    c.art.push_back(rng.next());
  }
  c.banner = headline(rng, 2);
  c.banner_art = rng.next();
  return c;
}

Screen home(Resolution res, const Content& content) {
  Builder b(res, "home");
  b.app_bar("NEWS");
  const DpRect search{16, 60, 344, 100};
  b.canvas.frame(search, 1.5, kBorder);
  b.label(28, 74.75, "Search", kMuted);
  b.region(search, "text_input", "results", "search");
  for (int k = 0; k < 3; ++k) {
    const double x0 = 16 + k * 112.0;
    b.button({x0, 112, x0 + 104, 156}, kTabs[k], "tap", fmt::format("section_{}", k),
             fmt::format("tab_{}", k));
  }
  const DpRect banner{16, 168, 344, 248};
  Rng art(content.banner_art);
  b.canvas.fill(banner, Color{235, 225, 200});
  b.canvas.frame(banner, 1.5, kBorder);
  b.canvas.pattern({24, 176, 336, 216}, art, 36);
  b.label(28, 226, content.banner);
  b.region(banner, "swipe", "home", "banner");
  for (int i = 0; i < kCards; ++i) {
    const double y0 = 296 + 86.0 * i;
    const DpRect card{16, y0, 344, y0 + 76};
    b.canvas.frame(card, 1.5, kBorder);
    Rng thumb(content.art[i]);
    b.canvas.fill({24, y0 + 8, 84, y0 + 68}, Color{220, 230, 240});
    b.canvas.pattern({24, y0 + 8, 84, y0 + 68}, thumb, 24);
    b.label(96, y0 + 16, content.titles[i]);
    b.label(96, y0 + 44, fmt::format("{} min", 2 + i), kMuted);
    b.region(card, "tap", fmt::format("detail_{}", i), fmt::format("card_{}", i));
  }
  const double ny = b.h() - 52;
  for (int k = 0; k < 4; ++k) {
    const double x0 = 16 + k * 84.0;
    const std::string target = k == 0 ? "home" : fmt::format("section_{}", k - 1);
    b.button({x0, ny, x0 + 76, ny + 44}, kNav[k], "tap", target, fmt::format("nav_{}", k));
  }
  return b.finish();
}

Screen detail(Resolution res, const Content& content, int i) {
  Builder b(res, fmt::format("detail_{}", i));
  b.app_bar("ARTICLE");
  b.back_button();
  Rng art(content.art[i] ^ 0xA5A5A5A5ULL);
  const DpRect hero{16, 116, 344, 236};
  b.canvas.fill(hero, Color{225, 235, 225});
  b.canvas.frame(hero, 1.5, kBorder);
  b.canvas.pattern({24, 124, 336, 228}, art, 40);
  const DpRect panel{16, 252, 344, b.h() - 84};
  b.canvas.frame(panel, 1.5, kBorder);
  b.label(28, 266, content.titles[i], kInk);
  Rng body(content.art[i] + 7);
  for (double y = 292; y + 11 < panel.y1 - 12; y += 18) b.label(28, y, headline(body, 3), kMuted);
  const double by = b.h() - 64;
  b.button({16, by, 172, by + 44}, "Like", "tap", b.screen.name, b.screen.name + "_like");
  b.button({188, by, 344, by + 44}, "Share", "long_press", "results", b.screen.name + "_share");
  return b.finish();
}

Screen results(Resolution res, const Content& content) {
  Builder b(res, "results");
  b.app_bar("RESULTS");
  b.back_button();
  for (int i = 0; i < kResults; ++i) {
    const double y0 = 116 + 68.0 * i;
    const DpRect row{16, y0, 344, y0 + 56};
    b.canvas.frame(row, 1.5, kBorder);
    b.label(28, y0 + 12, fmt::format("Result {}", i + 1));
    b.label(28, y0 + 32, content.titles[i % kCards], kMuted);
    b.region(row, "tap", fmt::format("detail_{}", i % kCards), fmt::format("result_{}", i));
  }
  return b.finish();
}

Screen section(Resolution res, const Content& content, int k) {
  Builder b(res, fmt::format("section_{}", k));
  b.app_bar(kTabs[k]);
  b.back_button();
  for (int i = 0; i < 6; ++i) {
    const double x0 = 16 + (i % 2) * 172.0;
    const double y0 = 116 + (i / 2) * 116.0;
    const DpRect tile{x0, y0, x0 + 156, y0 + 100};
    b.canvas.frame(tile, 1.5, kBorder);
    const int article = (k + i) % kCards;
    Rng thumb(content.art[article] + 31 * static_cast<std::uint64_t>(i + 1));
    b.canvas.fill({x0 + 8, y0 + 8, x0 + 148, y0 + 64}, Color{240, 230, 230});
    b.canvas.pattern({x0 + 8, y0 + 8, x0 + 148, y0 + 64}, thumb, 28);
    b.label(x0 + 8, y0 + 76, fmt::format("{} {}", kTabs[k], i + 1));
    b.region(tile, "tap", fmt::format("detail_{}", article), fmt::format("tile_{}_{}", k, i));
  }
  return b.finish();
}

}  // namespace

SimulatedSession news_app(const AppOptions& opts) {
  if (!opts.resolution.valid() || opts.resolution.width < 240 ||
      opts.resolution.height < 2 * opts.resolution.width) {
    throw Error(fmt::format("news_app: unsupported resolution {}x{}", opts.resolution.width,
                            opts.resolution.height));
  }
  const Content content = make_content(opts.content_seed);
  SimulatedSession s;
  s.serial = opts.serial;
  s.initial = "home";
  s.screens.push_back(home(opts.resolution, content));
  s.screens.push_back(results(opts.resolution, content));
  for (int k = 0; k < 3; ++k) s.screens.push_back(section(opts.resolution, content, k));
  for (int i = 0; i < kCards; ++i) s.screens.push_back(detail(opts.resolution, content, i));
  validate_session(s);
  return s;
}

bool content_dependent(std::string_view screen) {
  return screen == "home" || screen == "results" || screen.starts_with("section_") ||
         screen.starts_with("detail_");
}

std::vector<RecordEvent> random_walk(const SimulatedSession& session, std::size_t count,
                                     std::uint64_t seed) {
  Rng rng(seed);
  auto shared = std::make_shared<const SimulatedSession>(session);
  SimulatedDevice device(shared);
  const Resolution res = session.resolution();
  std::vector<std::string> history;
  std::vector<RecordEvent> out;
  while (out.size() < count) {
    const Screen& screen = session.screen(device.current_screen());
    const std::size_t options = screen.regions.size() + (history.empty() ? 0 : 1);
    const std::size_t pick = rng.index(options);
    RecordEvent e;
    if (pick == screen.regions.size()) {
      e.kind = "back";
      device.dispatch(op::Back{}, {0.5, 0.5});
      history.pop_back();
      out.push_back(e);
      continue;
    }
    const Region& r = screen.regions[pick];
    auto inside = [&](double fx, double fy) {
      return RelPoint{(r.box.x0 + fx * r.box.width()) / res.width,
                      (r.box.y0 + fy * r.box.height()) / res.height};
    };
    e.kind = r.op;
    e.point = inside(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75));
    OperationKind kind = op::Tap{};
    if (r.op == "swipe") {
      const double fx = rng.uniform(0.6, 0.8);
      const double fy = rng.uniform(0.3, 0.7);
      e.point = inside(fx, fy);
      e.end = inside(fx - 0.4, fy);
      kind = op::Swipe{*e.point, *e.end};
    } else if (r.op == "text_input") {
      e.text = fmt::format("query {}", rng.index(100));
      kind = op::TextInput{e.text};
    } else if (r.op == "long_press") {
      kind = op::LongPress{};
    }
    const std::string before = device.current_screen();
    const HitResult hit = device.dispatch(kind, *e.point);
    if (!hit.hit || hit.widget_id != r.id) {
      throw Error(fmt::format("random_walk: event on '{}' missed its region", r.id));
    }
    if (hit.screen != before) history.push_back(before);
    out.push_back(std::move(e));
  }
  return out;
}

RasterImage render_grid(const GridSpec& g) {
  Canvas canvas(g.resolution, kWhite);
  const double s = canvas.scale();
  for (const PixelBox& b : grid_boxes(g)) {
    const DpRect r{b.x0 / s, b.y0 / s, (b.x1 + 1) / s, (b.y1 + 1) / s};
    canvas.frame(r, 3 / s, kBorder);
    canvas.text(r.x0 + 8 / s, r.y0 + 8 / s, "ab", kInk, 3 / s);
  }
  return canvas.image();
}

std::vector<PixelBox> grid_boxes(const GridSpec& g) {
  std::vector<PixelBox> out;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const int x0 = g.left + c * (g.box_w + g.col_gap);
      const int y0 = g.top + r * (g.box_h + g.row_gap);
      out.push_back({x0, y0, x0 + g.box_w - 1, y0 + g.box_h - 1});
    }
  }
  for (const auto& b : out) {
    if (!b.within(g.resolution)) throw Error("grid does not fit the screen");
  }
  return out;
}

}  // namespace visreplay::synth
