// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "fixtures.hpp"
#include "visreplay/candidates.hpp"
#include "visreplay/homography.hpp"
#include "visreplay/layout.hpp"
#include "visreplay/matching.hpp"
#include "visreplay/recorder.hpp"
#include "visreplay/replay.hpp"
#include "visreplay/synth.hpp"

namespace visreplay {
namespace {

using Clock = std::chrono::steady_clock;
const auto kWhen = std::chrono::system_clock::time_point{std::chrono::seconds{1700000000}};
constexpr Resolution kD0{1080, 2244};
constexpr Resolution kD3{720, 1544};

struct Verdict {
  bool pass;
  std::string detail;
};

std::shared_ptr<const SimulatedSession> shared(SimulatedSession s) {
  return std::make_shared<const SimulatedSession>(std::move(s));
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Screen each step was recorded on, following the recorded transitions.
std::vector<std::string> step_screens(const LitsScript& script, const std::string& initial) {
  std::vector<std::string> out;
  std::string current = initial;
  for (const auto& step : script.steps) {
    out.push_back(current);
    if (step.expect) current = step.expect->screen;
  }
  return out;
}

// Reports collected by the replay checks, reused for the arithmetic check.
std::vector<ReplayReport> g_reports;

Verdict round_trip() {
  const auto t0 = Clock::now();
  const std::vector<synth::AppOptions> sessions = {{{720, 1544}, "RT-1", 1},
                                                   {{1080, 2244}, "RT-2", 2},
                                                   {{540, 1158}, "RT-3", 3},
                                                   {{720, 1600}, "RT-4", 4},
                                                   {{1440, 2960}, "RT-5", 5}};
  std::size_t steps = 0, ok = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto session = shared(synth::news_app(sessions[i]));
    SimulatedDevice rec_dev(session);
    const LitsScript script =
        record_headless(rec_dev, synth::random_walk(*session, 12, 100 + i), kWhen);
    SimulatedDevice dev(session);
    const ReplayReport r = replay_script(script, dev);
    steps += r.total_steps;
    for (const auto& o : r.outcomes) ok += o.success;
    g_reports.push_back(r);
  }
  const double secs = seconds_since(t0);
  const double acc = steps ? static_cast<double>(ok) / static_cast<double>(steps) : 0.0;
  return {acc == 1.0 && steps >= 50 && sessions.size() >= 5 && secs < 60,
          fmt::format("{} sessions, {} steps, accuracy {:.4f}, {:.1f} s", sessions.size(), steps, acc, secs)};
}

Verdict cross_resolution() {
  // D0 records; D3 replays with different content on the same layout.
  const auto hi = shared(synth::news_app({kD0, "D0", 1}));
  const auto lo = shared(synth::news_app({kD3, "D3", 2}));
  std::size_t steps = 0, ok = 0, content_steps = 0, content_image = 0, content_layout = 0;
  for (std::uint64_t walk : {1, 2, 4}) {
    SimulatedDevice rec_dev(hi);
    const LitsScript script = record_headless(rec_dev, synth::random_walk(*hi, 30, walk), kWhen);
    SimulatedDevice dev(lo);
    FusionConfig cfg;
    cfg.gamma = 0.5;
    const ReplayReport r = replay_script(script, dev, cfg);
    const auto screens = step_screens(script, hi->initial);
    steps += r.total_steps;
    for (const auto& o : r.outcomes) {
      ok += o.success;
      if (script.steps[o.index].has_widget() && synth::content_dependent(screens[o.index])) {
        ++content_steps;
        content_image += o.image_ok;
        content_layout += o.layout_ok;
      }
    }
    g_reports.push_back(r);
  }
  const double acc = static_cast<double>(ok) / static_cast<double>(steps);
  return {acc >= 0.9 && content_layout >= content_image && content_steps > 0,
          fmt::format("D0->D3 accuracy {:.4f} over {} steps; content-mutated widget steps {}: layout arm {} >= "
                      "image arm {}",
                      acc, steps, content_steps, content_layout, content_image)};
}

struct PasteFixture {
  GrayImage widget;
  GrayImage screen;
  Eigen::Vector2d center;
};

std::vector<PasteFixture> paste_fixtures() {
  const SimulatedSession app = synth::news_app({kD3, "P", 7});
  std::vector<std::pair<const Screen*, PixelBox>> crops;
  for (const Screen& s : app.screens)
    for (const Region& r : s.regions)
      if (r.box.width() >= 60 && r.box.height() >= 40) crops.emplace_back(&s, r.box);

  synth::Rng rng(2024);
  std::vector<PasteFixture> out;
  for (int i = 0; i < 100; ++i) {
    const auto& [screen, box] = crops[rng.index(crops.size())];
    const GrayImage full = to_grayscale(screen->image);
    PasteFixture f;
    f.widget = full.block(box.y0, box.x0, box.height(), box.width());
    synth::Canvas bg(kD3, {245, 245, 245});
    for (int k = 0; k < 6; ++k) {
      const double x = rng.uniform(0, 300), y = rng.uniform(0, 700);
      bg.pattern({x, y, x + 60, y + 40}, rng, 12);
    }
    f.screen = to_grayscale(bg.image());
    const double scale = rng.uniform(0.8, 1.2);
    const double angle = rng.uniform(-10, 10) * M_PI / 180;
    const double reach = 0.5 * scale * std::hypot(box.width(), box.height()) + 2;
    f.center = {rng.uniform(reach, kD3.width - reach), rng.uniform(reach, kD3.height - reach)};
    testing::paste(f.screen, f.widget, f.center, scale, angle);
    out.push_back(std::move(f));
  }
  return out;
}

Verdict feature_localization() {
  const auto fixtures = paste_fixtures();
  const double tolerance = 0.03 * std::hypot(kD3.width, kD3.height);
  auto run = [&](std::string& bytes) {
    int good = 0;
    for (const auto& f : fixtures) {
      const auto c = locate_candidates(f.widget, f.screen);
      bytes += candidates_to_xml(c, resolution_of(f.widget), resolution_of(f.screen));
      if (!c.empty() && (c.front().box.center() - f.center).norm() < tolerance) ++good;

    }
    return good;
  };
  std::string first, second;
  const int good = run(first);
  run(second);
  const bool identical = first == second;
  return {good >= 95 && identical,
          fmt::format("{}/100 centers within {:.1f} px; repeat run {}", good, tolerance,
                      identical ? "byte-identical" : "differs")};
}

Verdict ratio_soundness() {
  synth::Rng rng(3);
  std::vector<MatchPair> pairs;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double a = rng.index(10) == 0 ? 0.0 : rng.uniform(0, 2);
    const double b = rng.index(20) == 0 ? 0.0 : a + rng.uniform(0, 2);
    pairs.push_back({i, rng.index(500), rng.index(500), std::min(a, b), b});
  }
  std::vector<MatchPair> oracle;
  for (const auto& p : pairs)
    if (p.d_second_min == 0 || p.d_min / p.d_second_min < 0.5) oracle.push_back(p);
  const bool exact = ratio_filter(pairs, 0.5) == oracle;

  bool monotone = true;
  const std::vector<double> deltas = {0.3, 0.5, 0.7, 0.999};
  for (std::size_t i = 0; i + 1 < deltas.size(); ++i) {
    std::set<std::size_t> wider;
    for (const auto& p : ratio_filter(pairs, deltas[i + 1])) wider.insert(p.target_index);
    for (const auto& p : ratio_filter(pairs, deltas[i])) monotone = monotone && wider.count(p.target_index);
  }
  return {exact && monotone, fmt::format("delta 0.5 output {} oracle ({} kept); monotone over 0.3/0.5/0.7/0.999: {}",
                                         exact ? "equals" : "differs from", oracle.size(), monotone ? "yes" : "no")};
}

std::vector<MatchPair> brute_force(const DescriptorMatrix& target, const DescriptorMatrix& source) {
  std::vector<MatchPair> out;
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    std::vector<std::pair<double, std::size_t>> d;
    for (Eigen::Index s = 0; s < source.rows(); ++s) {
      double acc = 0;
      for (int k = 0; k < kDescriptorSize; ++k) {
        const double diff = static_cast<double>(target(t, k)) - static_cast<double>(source(s, k));
        acc += diff * diff;
      }
      d.emplace_back(std::sqrt(acc), static_cast<std::size_t>(s));
    }
    std::partial_sort(d.begin(), d.begin() + 2, d.end());
    out.push_back({static_cast<std::size_t>(t), d[0].second, d[1].second, d[0].first, d[1].first});
  }
  return out;
}

Verdict knn_exactness() {
  synth::Rng rng(4);
  int equal = 0;
  std::size_t largest = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 2 + rng.index(4999);
    const std::size_t m = 1 + rng.index(800);
    largest = std::max(largest, n);
    const DescriptorMatrix s = testing::random_descriptors(rng, n);
    const DescriptorMatrix t = testing::random_descriptors(rng, m);
    equal += knn_match(t, s) == brute_force(t, s);
  }
  return {equal == 20, fmt::format("{}/20 instances equal the all-pairs oracle (largest source {})", equal, largest)};
}

Verdict homography_recovery() {
  using Vec2 = Eigen::Vector2d;
  synth::Rng rng(5);
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double s = rng.uniform(0.5, 2), a = rng.uniform(-M_PI, M_PI);
    Eigen::Matrix3d truth;
    truth << s * std::cos(a), -s * std::sin(a), rng.uniform(0, 500), s * std::sin(a), s * std::cos(a),
        rng.uniform(0, 500), 0, 0, 1;
    std::vector<Vec2> from, to;
    for (int i = 0; i < 50; ++i) {
      const Vec2 p(rng.uniform(0, 200), rng.uniform(0, 100));
      from.push_back(p);
      if (i < 30) {
        to.emplace_back(rng.uniform(0, 1000), rng.uniform(0, 1000));
      } else {
        to.push_back((truth * p.homogeneous()).hnormalized() + Vec2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)));
      }
    }
    const auto fit = estimate_homography<double>(std::span<const Vec2>(from), std::span<const Vec2>(to));
    if (!fit) continue;
    double worst = 0;
    for (const Vec2& c : {Vec2(0, 0), Vec2(200, 0), Vec2(200, 100), Vec2(0, 100)}) {
      worst = std::max(worst, (fit->homography.apply(c) - (truth * c.homogeneous()).hnormalized()).norm());
    }
    good += worst < 1.0;
  }
  return {good >= 95, fmt::format("{}/100 trials with corner error < 1 px at 60% outliers", good)};
}

// Geometric oracle: rows farther apart than the group gap form groups in
// top-to-bottom order; columns count cells to the left in the same row.
LayoutTuple grid_tuple(const std::vector<PixelBox>& cells, const PixelBox& b) {
  std::set<int> rows_above;
  int column = 0;
  for (const auto& c : cells) {
    if (c.y0 < b.y0) rows_above.insert(c.y0);
    if (c.y0 == b.y0 && c.x0 < b.x0) ++column;
  }
  return {static_cast<int>(rows_above.size()), 0, column};
}

Verdict layout_oracle() {
  synth::Rng rng(6);
  const std::vector<Resolution> screens = {kD3, kD0, {540, 1158}};
  int equal = 0;
  for (int i = 0; i < 50; ++i) {
    synth::GridSpec g;
    g.resolution = screens[rng.index(screens.size())];
    const double unit = g.resolution.width / 360.0;
    g.rows = 1 + static_cast<int>(rng.index(5));
    g.cols = 1 + static_cast<int>(rng.index(3));
    g.box_w = static_cast<int>(unit * rng.uniform(70, 100));
    g.box_h = static_cast<int>(unit * rng.uniform(55, 80));
    g.col_gap = static_cast<int>(unit * rng.uniform(10, 30));
    g.row_gap = static_cast<int>(0.05 * g.resolution.height + unit * rng.uniform(5, 20));
    g.left = static_cast<int>(unit * rng.uniform(5, 20));
    g.top = static_cast<int>(unit * rng.uniform(10, 40));
    // Drop the columns and rows that would run off the screen.
    g.cols = std::min(g.cols, (g.resolution.width - g.left + g.col_gap) / (g.box_w + g.col_gap));
    g.rows = std::min(g.rows, (g.resolution.height - g.top + g.row_gap) / (g.box_h + g.row_gap));
    const auto cells = synth::grid_boxes(g);
    const LayoutMap m = analyze_screen(synth::render_grid(g));
    bool same = m.entries.size() == cells.size();
    for (const auto& cell : cells) {
      const LayoutEntry* e = m.find(grid_tuple(cells, cell));
      same = same && e && iou(e->box, cell) > 0.9;
    }
    equal += same;
  }

  // Filter arithmetic on D0: 2% of 1080 is 21.6 px, 60% is 648 px, 1% of
  // the screen is 24235.2 px^2.
  const bool r1 = drop_small_sides(std::vector<PixelBox>{{0, 0, 20, 20}, {0, 0, 21, 9}}, kD0) ==
                  std::vector<PixelBox>{{0, 0, 21, 9}};
  const PixelBox outer{90, 200, 989, 499};
  const bool r2 = drop_nested(std::vector<PixelBox>{outer, {100, 250, 746, 300}, {100, 320, 747, 360}}, kD0) ==
                  std::vector<PixelBox>{outer, {100, 320, 747, 360}};
  const bool r3 = drop_small_areas(std::vector<PixelBox>{{0, 0, 154, 155}, {0, 0, 155, 155}}, kD0) ==
                  std::vector<PixelBox>{{0, 0, 155, 155}};
  return {equal == 50 && r1 && r2 && r3,
          fmt::format("{}/50 grids equal the oracle; R1 {}, R2 {}, R3 {}", equal, r1 ? "ok" : "wrong",
                      r2 ? "ok" : "wrong", r3 ? "ok" : "wrong")};
}

Verdict fusion_endpoints() {
  const auto hi = shared(synth::news_app({kD0, "D0", 1}));
  const auto lo = shared(synth::news_app({kD3, "D3", 3}));
  SimulatedDevice rec_dev(hi);
  const LitsScript script = record_headless(rec_dev, synth::random_walk(*hi, 30, 9), kWhen);
  std::size_t fixtures = 0, exact = 0;
  for (double gamma : {1.0, 0.0}) {
    FusionConfig cfg;
    cfg.gamma = gamma;
    SimulatedDevice dev(lo);
    const ReplayReport r = replay_script(script, dev, cfg);
    for (const auto& o : r.outcomes) {
      if (!o.image_point || !o.layout_point || fixtures >= 40) continue;
      ++fixtures;
      exact += o.dispatched_point == (gamma == 1.0 ? o.image_point : o.layout_point);
    }
  }
  return {fixtures >= 40 && exact == fixtures,
          fmt::format("{}/{} dispatches equal the selected arm's point (20 fixtures per endpoint)", exact, fixtures)};
}

Verdict report_arithmetic() {
  std::size_t finals = 0;
  for (const auto& r : g_reports)
    for (const auto& o : r.outcomes) finals += o.final_ok;
  const ArmSummary s = summarize(g_reports);
  const std::size_t sum = s.both + s.image_only + s.layout_only + s.neither;
  return {!g_reports.empty() && sum == s.final_ok && s.final_ok == finals,
          fmt::format("{} reports: both {} + image-only {} + layout-only {} + neither {} = {} = final successes {}",
                      g_reports.size(), s.both, s.image_only, s.layout_only, s.neither, sum, finals)};
}

}  // namespace
}  // namespace visreplay

// An optional argument runs only the checks whose name contains it.
int main(int argc, char** argv) {
  using namespace visreplay;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> checks = {
      {"round-trip fidelity", round_trip},
      {"cross-resolution replay", cross_resolution},
      {"feature-matching localization", feature_localization},
      {"ratio test soundness", ratio_soundness},
      {"knn exactness", knn_exactness},
      {"homography recovery", homography_recovery},
      {"layout oracle equivalence", layout_oracle},
      {"fusion endpoints", fusion_endpoints},
      {"report arithmetic", report_arithmetic},
  };
  int failed = 0;
  const std::string only = argc > 1 ? argv[1] : "";
  for (const auto& [name, check] : checks) {
    if (std::string_view(name).find(only) == std::string_view::npos) continue;
    Verdict v{false, ""};
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
