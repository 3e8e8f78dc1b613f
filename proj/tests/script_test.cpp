#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "visreplay/script.hpp"

namespace visreplay {
namespace {

using testing::meta;
using testing::TempDir;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

LitsScript sample_script(std::size_t steps, Resolution res = {120, 200}) {
  synth::Rng rng(42);
  LitsScript s;
  s.id = make_script_id("DEV-1", std::chrono::system_clock::time_point(std::chrono::seconds(1700000000)));
  for (std::size_t i = 0; i < steps; ++i) {
    const RasterImage img = testing::random_image(rng, res.width, res.height);
    OperationKind kind = op::Tap{};
    if (i % 3 == 1) kind = op::Swipe{{0.25, 0.5}, {0.75, 0.5}};
    if (i % 3 == 2) kind = op::TextInput{"hello <world> & \"q\""};
    auto step = make_step(img, {10, 20, 59, 79}, {30.0, 40.0}, kind, "label " + std::to_string(i),
                          meta(res));
    if (i == 0) step.expect = Expectation{"w0", "next"};
    s.steps.push_back(std::move(step));
  }
  return s;
}

TEST(MakeStep, CenterOfD0) {
  const Resolution d0{1080, 2244};
  const auto s = make_step(testing::solid(1080, 2244, 0), {500, 1100, 580, 1140}, {540.0, 1122.0},
                           op::Tap{}, "", meta(d0));
  EXPECT_EQ(s.op_point, (RelPoint{0.5, 0.5}));
}

TEST(MakeStep, FullScreenBoxOfD3) {
  const Resolution d3{720, 1544};
  synth::Rng rng(1);
  const RasterImage img = testing::random_image(rng, 720, 1544);
  const auto s = make_step(img, {0, 0, 720, 1544}, {360.0, 772.0}, op::Tap{}, "", meta(d3));
  EXPECT_EQ(s.widget_box, kFullScreen);
  EXPECT_EQ(s.widget_image, img);
}

TEST(MakeStep, HandCheckedDivisions) {
  // 108/1080 = 0.1, 234/2340 = 0.1, 324/1080 = 0.3, 468/2340 = 0.2
  const Resolution r{1080, 2340};
  const auto s = make_step(testing::solid(1080, 2340, 9), {108, 234, 324, 468}, {200.0, 300.0},
                           op::Tap{}, "", meta(r));
  EXPECT_EQ(s.widget_box, (RelBox{{0.1, 0.1}, {0.3, 0.2}}));
  EXPECT_EQ(s.widget_image.resolution(), (Resolution{217, 235}));
}

TEST(MakeStep, Rejections) {
  const Resolution r{100, 100};
  const RasterImage img = testing::solid(100, 100, 1);
  EXPECT_THROW(make_step(img, {10, 10, 20, 20}, {30.0, 15.0}, op::Tap{}, "", meta(r)), ScriptError);
  EXPECT_THROW(make_step(img, {10, 10, 120, 20}, {15.0, 15.0}, op::Tap{}, "", meta(r)), ScriptError);
  EXPECT_THROW(make_step(img, {10, 10, 10, 20}, {10.0, 15.0}, op::Tap{}, "", meta(r)), ScriptError);
  EXPECT_THROW(make_step(img, {10, 10, 20, 20}, {15.0, 15.0}, op::Tap{}, "", meta({100, 90})),
               ScriptError);
  EXPECT_THROW(make_step(img, {10, 10, 20, 20}, {15.0, 15.0}, op::Tap{}, "", meta(r, "")),
               ScriptError);
}

TEST(MakeStep, NormalizationInverseProperty) {
  synth::Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const Resolution r{static_cast<int>(100 + rng.index(1500)), static_cast<int>(100 + rng.index(2500))};
    const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(r.width - 2)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(r.height - 2)));
    const int x1 = x0 + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(r.width - x0)));
    const int y1 = y0 + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(r.height - y0)));
    const PixelBox b{x0, y0, x1, y1};
    const auto s = make_step(testing::solid(r.width, r.height, 0), b,
                             {(x0 + x1) / 2.0, (y0 + y1) / 2.0}, op::Tap{}, "", meta(r));
    EXPECT_NEAR(s.widget_box.top_left.x * r.width, x0, 1.0);
    EXPECT_NEAR(s.widget_box.top_left.y * r.height, y0, 1.0);
    EXPECT_NEAR(s.widget_box.bottom_right.x * r.width, x1, 1.0);
    EXPECT_NEAR(s.widget_box.bottom_right.y * r.height, y1, 1.0);
    EXPECT_TRUE(validate_step(s).empty());
  }
}

TEST(MakeStep, ResolutionIndependenceProperty) {
  synth::Rng rng(78);
  const Resolution a{1080, 2244};
  const Resolution b{720, 1496};  // same aspect, 2/3 scale
  for (int trial = 0; trial < 200; ++trial) {
    // Gestures at multiples of 3 px on the large screen map to whole pixels on the small one.
    const int x0 = 3 * static_cast<int>(rng.index(300));
    const int y0 = 3 * static_cast<int>(rng.index(700));
    const int w = 3 * static_cast<int>(1 + rng.index(20));
    const int h = 3 * static_cast<int>(1 + rng.index(20));
    const auto sa = make_step(testing::solid(a.width, a.height, 0), {x0, y0, x0 + w, y0 + h},
                              {x0 + 0.0, y0 + 0.0}, op::Tap{}, "", meta(a));
    const auto sb = make_step(testing::solid(b.width, b.height, 0),
                              {x0 * 2 / 3, y0 * 2 / 3, (x0 + w) * 2 / 3, (y0 + h) * 2 / 3},
                              {x0 * 2.0 / 3, y0 * 2.0 / 3}, op::Tap{}, "", meta(b));
    const double tol = 1.0 / std::min(b.width, b.height);
    EXPECT_NEAR(sa.widget_box.top_left.x, sb.widget_box.top_left.x, tol);
    EXPECT_NEAR(sa.widget_box.top_left.y, sb.widget_box.top_left.y, tol);
    EXPECT_NEAR(sa.widget_box.bottom_right.x, sb.widget_box.bottom_right.x, tol);
    EXPECT_NEAR(sa.widget_box.bottom_right.y, sb.widget_box.bottom_right.y, tol);
    EXPECT_NEAR(sa.op_point.x, sb.op_point.x, tol);
    EXPECT_NEAR(sa.op_point.y, sb.op_point.y, tol);
  }
}

TEST(ScriptId, UtcFormat) {
  const auto t = std::chrono::system_clock::time_point(std::chrono::seconds(1700000000));
  EXPECT_EQ(make_script_id("WBUBB18923510113", t), "WBUBB18923510113-20231114T221320Z");
}

TEST(SaveScript, DirectoryLayout) {
  TempDir dir;
  const LitsScript s = sample_script(3);
  const fs::path root = save_script(s, dir.path());
  EXPECT_EQ(root, dir.path() / s.id);
  EXPECT_TRUE(fs::exists(root / "manifest.xml"));
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) subdirs.push_back(e.path().filename().string());
  std::sort(subdirs.begin(), subdirs.end());
  EXPECT_EQ(subdirs, (std::vector<std::string>{"000", "001", "002"}));
  for (const auto& sd : subdirs) {
    int png = 0, xml = 0, other = 0;
    for (const auto& e : fs::directory_iterator(root / sd)) {
      const auto ext = e.path().extension();
      if (ext == ".png") ++png;
      else if (ext == ".xml") ++xml;
      else ++other;
    }
    EXPECT_EQ(png, 2);
    EXPECT_EQ(xml, 1);
    EXPECT_EQ(other, 0);
    EXPECT_TRUE(fs::exists(root / sd / "activity.png"));
    EXPECT_TRUE(fs::exists(root / sd / "widget.png"));
    EXPECT_TRUE(fs::exists(root / sd / "step.xml"));
  }
  const std::string step = slurp(root / "000" / "step.xml");
  EXPECT_NE(step.find("<widget_box"), std::string::npos);
  EXPECT_NE(step.find("<op_point"), std::string::npos);
  EXPECT_NE(step.find("<device"), std::string::npos);
  EXPECT_TRUE(std::regex_search(step, std::regex(R"(x0="0\.083333")")));
}

TEST(SaveScript, Rejections) {
  TempDir dir;
  LitsScript empty;
  empty.id = "X-20200101T000000Z";
  EXPECT_THROW(save_script(empty, dir.path()), ScriptError);
  const LitsScript s = sample_script(1);
  save_script(s, dir.path());
  EXPECT_THROW(save_script(s, dir.path()), ScriptError);
}

TEST(LoadScript, RoundTrip) {
  TempDir dir;
  for (std::size_t n : {1u, 4u, 7u}) {
    LitsScript s = sample_script(n);
    s.id += std::to_string(n);
    s.steps.push_back(make_screen_step(s.steps[0].activity_image, op::Back{}, "", s.steps[0].device));
    EXPECT_EQ(load_script(save_script(s, dir.path())), s);
  }
}

TEST(LoadScript, RoundTripProperty) {
  TempDir dir;
  synth::Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const Resolution r{static_cast<int>(40 + rng.index(100)), static_cast<int>(40 + rng.index(100))};
    LitsScript s;
    s.id = "P" + std::to_string(trial) + "-20240101T000000Z";
    const std::size_t n = 1 + rng.index(5);
    for (std::size_t i = 0; i < n; ++i) {
      const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(r.width / 2)));
      const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(r.height / 2)));
      const PixelBox b{x0, y0, x0 + 5 + static_cast<int>(rng.index(10)),
                       y0 + 5 + static_cast<int>(rng.index(10))};
      const Eigen::Vector2d p(rng.uniform(b.x0, b.x1), rng.uniform(b.y0, b.y1));
      s.steps.push_back(make_step(testing::random_image(rng, r.width, r.height), b, p,
                                  op::LongPress{}, std::string(rng.index(4), 'a'), meta(r)));
    }
    EXPECT_EQ(load_script(save_script(s, dir.path())), s);
  }
}

TEST(LoadScript, ManifestListsMissingStep) {
  TempDir dir;
  const fs::path root = save_script(sample_script(3), dir.path());
  std::string manifest = slurp(root / "manifest.xml");
  const auto end = manifest.find("</script>");
  ASSERT_NE(end, std::string::npos);
  manifest.insert(end, "<step index=\"3\" op=\"tap\" text=\"\"/>");
  spit(root / "manifest.xml", manifest);
  try {
    load_script(root);
    FAIL() << "expected ScriptError";
  } catch (const ScriptError& e) {
    ASSERT_TRUE(e.step());
    EXPECT_EQ(*e.step(), 3u);
  }
}

TEST(LoadScript, TamperedPointViolatesInvariant) {
  TempDir dir;
  const fs::path root = save_script(sample_script(2), dir.path());
  std::string step = slurp(root / "001" / "step.xml");
  step = std::regex_replace(step, std::regex(R"((<op_point[^>]*\bx=")[0-9.]+")"), "$011.5\"");
  ASSERT_NE(step.find("\"1.5\""), std::string::npos);
  spit(root / "001" / "step.xml", step);
  try {
    load_script(root);
    FAIL() << "expected ScriptError";
  } catch (const ScriptError& e) {
    ASSERT_TRUE(e.step());
    EXPECT_EQ(*e.step(), 1u);
  }
}

TEST(LoadScript, MalformedInputs) {
  TempDir dir;
  EXPECT_THROW(load_script(dir / "nope"), Error);
  const fs::path root = save_script(sample_script(2), dir.path());
  spit(root / "manifest.xml", "<script id=");
  EXPECT_THROW(load_script(root), Error);
}

TEST(Validate, Examples) {
  LitsScript s = sample_script(3);
  EXPECT_TRUE(validate_script(s).empty());

  LitsScript outside = s;
  outside.steps[1].op_point = {0.95, 0.95};
  const auto v = validate_script(outside);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].step, std::optional<std::size_t>(1));

  LitsScript mixed = s;
  mixed.steps[2].device.serial = "OTHER";
  const auto m = validate_script(mixed);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_FALSE(m[0].step);
}

TEST(Validate, SwipeNeedsDistinctEnds) {
  LitsScript s = sample_script(2);
  s.steps[1].op = op::Swipe{{0.2, 0.2}, {0.2, 0.2}};
  EXPECT_FALSE(validate_script(s).empty());
}

TEST(OpName, Spellings) {
  EXPECT_EQ(op_name(op::Tap{}), "tap");
  EXPECT_EQ(op_name(op::LongPress{}), "long_press");
  EXPECT_EQ(op_name(op::Swipe{}), "swipe");
  EXPECT_EQ(op_name(op::TextInput{}), "text_input");
  EXPECT_EQ(op_name(op::Back{}), "back");
}

TEST(FormatFraction, SixDigits) {
  EXPECT_EQ(format_fraction(0.5), "0.500000");
  EXPECT_EQ(format_fraction(1.0 / 3), "0.333333");
  EXPECT_EQ(format_fraction(1.0), "1.000000");
}

}  // namespace
}  // namespace visreplay
