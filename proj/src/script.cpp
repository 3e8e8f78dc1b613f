#include "visreplay/script.hpp"

#include <cmath>
#include <ctime>

#include <fmt/format.h>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

namespace fs = std::filesystem;

std::string_view op_name(const OperationKind& kind) {
  struct Namer {
    std::string_view operator()(const op::Tap&) const { return "tap"; }
    std::string_view operator()(const op::LongPress&) const { return "long_press"; }
    std::string_view operator()(const op::Swipe&) const { return "swipe"; }
    std::string_view operator()(const op::TextInput&) const { return "text_input"; }
    std::string_view operator()(const op::Back&) const { return "back"; }
  };
  return std::visit(Namer{}, kind);
}

std::string format_fraction(double v) { return fmt::format("{:.6f}", v); }

namespace {

double quantize(double v) { return std::stod(format_fraction(v)); }

RelPoint quantize(RelPoint p) { return {quantize(p.x), quantize(p.y)}; }

OperationKind quantize(OperationKind kind) {
  if (auto* s = std::get_if<op::Swipe>(&kind)) {
    s->start = quantize(s->start);
    s->end = quantize(s->end);
  }
  return kind;
}

std::string step_dir_name(std::size_t index, std::size_t count) {
  const int width = std::max<int>(3, static_cast<int>(fmt::format("{}", count - 1).size()));
  return fmt::format("{:0{}}", index, width);
}

void check_device(const DeviceMeta& device) {
  if (device.serial.empty()) throw ScriptError("device serial is empty");
  if (!device.resolution.valid()) throw ScriptError("device resolution must be positive");
}

}  // namespace

std::string make_script_id(std::string_view serial,
                           std::chrono::system_clock::time_point when) {
  const std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm utc{};
  gmtime_r(&t, &utc);
  return fmt::format("{}-{:04}{:02}{:02}T{:02}{:02}{:02}Z", serial, utc.tm_year + 1900,
                     utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec);
}

OperationStep make_step(const RasterImage& activity, const PixelBox& widget_box_px,
                        const Eigen::Vector2d& op_point_px, OperationKind kind,
                        std::string text, const DeviceMeta& device) {
  check_device(device);
  const Resolution res = device.resolution;
  if (activity.resolution() != res) {
    throw ScriptError(fmt::format("screenshot is {}x{} but device reports {}x{}",
                                  activity.width(), activity.height(), res.width,
                                  res.height));
  }
  const PixelBox& b = widget_box_px;
  if (!b.well_formed() || b.x1 > res.width || b.y1 > res.height) {
    throw ScriptError(fmt::format("widget box ({},{})-({},{}) outside {}x{} screen", b.x0,
                                  b.y0, b.x1, b.y1, res.width, res.height));
  }
  if (b.x0 == b.x1 || b.y0 == b.y1) throw ScriptError("widget box has zero area");
  if (!b.contains(op_point_px.x(), op_point_px.y())) {
    throw ScriptError(fmt::format("operated point ({}, {}) outside widget box",
                                  op_point_px.x(), op_point_px.y()));
  }
  const PixelBox clamped{b.x0, b.y0, std::min(b.x1, res.width - 1),
                         std::min(b.y1, res.height - 1)};

  OperationStep step;
  step.op = quantize(std::move(kind));
  step.activity_image = activity;
  step.widget_image = crop(activity, clamped);
  step.widget_box = {quantize(to_relative(b.x0, b.y0, res)),
                     quantize(to_relative(b.x1, b.y1, res))};
  step.op_point = quantize(to_relative(op_point_px.x(), op_point_px.y(), res));
  step.text = std::move(text);
  step.device = device;
  return step;
}

OperationStep make_screen_step(const RasterImage& activity, OperationKind kind,
                               std::string text, const DeviceMeta& device) {
  const Resolution r = device.resolution;
  return make_step(activity, PixelBox{0, 0, r.width, r.height},
                   Eigen::Vector2d(r.width / 2.0, r.height / 2.0), std::move(kind),
                   std::move(text), device);
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_step(const OperationStep& s) {
  std::vector<Violation> out;
  auto fail = [&out](std::string msg) { out.push_back({std::nullopt, std::move(msg)}); };

  const Resolution res = s.device.resolution;
  if (s.device.serial.empty()) fail("device serial is empty");
  if (!res.valid()) {
    fail("device resolution must be positive");
    return out;
  }
  if (!s.widget_box.top_left.in_unit_square() || !s.widget_box.bottom_right.in_unit_square()) {
    fail("widget box outside [0,1]");
  }
  if (!s.widget_box.ordered()) fail("widget box corners out of order");
  if (!s.op_point.in_unit_square()) {
    fail(fmt::format("operated point ({}, {}) outside [0,1]", s.op_point.x, s.op_point.y));
  } else if (!s.widget_box.contains(s.op_point)) {
    fail("operated point outside widget box");
  }
  if (s.activity_image.resolution() != res) {
    fail(fmt::format("activity screenshot is {}x{}, device is {}x{}", s.activity_image.width(),
                     s.activity_image.height(), res.width, res.height));
  }
  const double ew = s.widget_box.width() * res.width;
  const double eh = s.widget_box.height() * res.height;
  // Inclusive pixel boxes crop to (extent + 1); allow one pixel either way
  // plus the 6-digit rounding of both stored corners.
  const double slack_w = 1.0 + 1e-6 * res.width + 1e-9;
  const double slack_h = 1.0 + 1e-6 * res.height + 1e-9;
  if (s.widget_image.empty() || std::abs(s.widget_image.width() - ew) > slack_w ||
      std::abs(s.widget_image.height() - eh) > slack_h) {
    fail(fmt::format("widget crop {}x{} does not match widget box ({:.1f}x{:.1f} px)",
                     s.widget_image.width(), s.widget_image.height(), ew, eh));
  }
  if (const auto* sw = std::get_if<op::Swipe>(&s.op)) {
    if (sw->start == sw->end) fail("swipe start equals end");
    if (!sw->start.in_unit_square() || !sw->end.in_unit_square()) fail("swipe point outside [0,1]");
  }
  return out;
}

std::vector<Violation> validate_script(const LitsScript& script) {
  std::vector<Violation> out;
  if (script.id.empty()) out.push_back({std::nullopt, "script id is empty"});
  if (script.steps.empty()) out.push_back({std::nullopt, "script has no steps"});
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    for (auto& v : validate_step(script.steps[i])) out.push_back({i, std::move(v.message)});
  }
  for (std::size_t i = 1; i < script.steps.size(); ++i) {
    if (script.steps[i].device != script.steps[0].device) {
      out.push_back({std::nullopt, fmt::format("step {} was recorded on a different device", i)});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

fs::path save_script(const LitsScript& script, const fs::path& root) {
  if (script.steps.empty()) throw ScriptError("refusing to save an empty script");
  if (auto v = validate_script(script); !v.empty()) {
    throw ScriptError("invalid script: " + v.front().message, v.front().step);
  }
  const fs::path dir = root / script.id;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    throw ScriptError(fmt::format("{} already exists", dir.string()));
  }
  fs::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  xml::Tree manifest;
  xml::Tree& root_node = manifest.add_child("script", xml::Tree{});
  xml::set_attr(root_node, "id", script.id);

  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const OperationStep& s = script.steps[i];
    xml::Tree& entry = root_node.add_child("step", xml::Tree{});
    xml::set_attr(entry, "index", i);
    xml::set_attr(entry, "op", std::string(op_name(s.op)));
    xml::set_attr(entry, "text", s.text);
    if (const auto* sw = std::get_if<op::Swipe>(&s.op)) {
      xml::set_attr(entry, "from_x", format_fraction(sw->start.x));
      xml::set_attr(entry, "from_y", format_fraction(sw->start.y));
      xml::set_attr(entry, "to_x", format_fraction(sw->end.x));
      xml::set_attr(entry, "to_y", format_fraction(sw->end.y));
    } else if (const auto* ti = std::get_if<op::TextInput>(&s.op)) {
      xml::set_attr(entry, "payload", ti->payload);
    }
    if (s.expect) {
      xml::set_attr(entry, "expect_widget", s.expect->widget_id);
      xml::set_attr(entry, "expect_screen", s.expect->screen);
    }

    const fs::path sd = dir / step_dir_name(i, script.steps.size());
    fs::create_directory(sd, ec);
    if (ec) throw Error(fmt::format("cannot create {}: {}", sd.string(), ec.message()));
    write_png(s.activity_image, sd / "activity.png");
    write_png(s.widget_image, sd / "widget.png");

    xml::Tree doc;
    xml::Tree& step = doc.add_child("step", xml::Tree{});
    xml::Tree& box = step.add_child("widget_box", xml::Tree{});
    xml::set_attr(box, "x0", format_fraction(s.widget_box.top_left.x));
    xml::set_attr(box, "y0", format_fraction(s.widget_box.top_left.y));
    xml::set_attr(box, "x1", format_fraction(s.widget_box.bottom_right.x));
    xml::set_attr(box, "y1", format_fraction(s.widget_box.bottom_right.y));
    xml::Tree& pt = step.add_child("op_point", xml::Tree{});
    xml::set_attr(pt, "x", format_fraction(s.op_point.x));
    xml::set_attr(pt, "y", format_fraction(s.op_point.y));
    xml::Tree& dev = step.add_child("device", xml::Tree{});
    xml::set_attr(dev, "serial", s.device.serial);
    xml::set_attr(dev, "w", s.device.resolution.width);
    xml::set_attr(dev, "h", s.device.resolution.height);
    xml::write_file(doc, sd / "step.xml");
  }
  xml::write_file(manifest, dir / "manifest.xml");
  return dir;
}

namespace {

OperationKind parse_op(const xml::Tree& entry, const std::string& where) {
  const std::string name = xml::attr(entry, "op", where);
  if (name == "tap") return op::Tap{};
  if (name == "long_press") return op::LongPress{};
  if (name == "back") return op::Back{};
  if (name == "text_input") {
    return op::TextInput{xml::maybe_attr(entry, "payload").value_or("")};
  }
  if (name == "swipe") {
    return op::Swipe{{xml::attr_as<double>(entry, "from_x", where),
                      xml::attr_as<double>(entry, "from_y", where)},
                     {xml::attr_as<double>(entry, "to_x", where),
                      xml::attr_as<double>(entry, "to_y", where)}};
  }
  throw Error(fmt::format("{}: unknown operation '{}'", where, name));
}

OperationStep load_step(const fs::path& sd, const xml::Tree& entry) {
  for (const char* f : {"activity.png", "widget.png", "step.xml"}) {
    if (!fs::exists(sd / f)) throw Error(fmt::format("missing {}", (sd / f).string()));
  }
  OperationStep s;
  s.op = parse_op(entry, "manifest.xml");
  s.text = xml::maybe_attr(entry, "text").value_or("");
  auto ew = xml::maybe_attr(entry, "expect_widget");
  auto es = xml::maybe_attr(entry, "expect_screen");
  if (ew || es) s.expect = Expectation{ew.value_or(""), es.value_or("")};

  const std::string where = (sd / "step.xml").string();
  const xml::Tree doc = xml::read_file(sd / "step.xml");
  const xml::Tree& step = xml::child(doc, "step", where);
  const xml::Tree& box = xml::child(step, "widget_box", where);
  s.widget_box = {{xml::attr_as<double>(box, "x0", where), xml::attr_as<double>(box, "y0", where)},
                  {xml::attr_as<double>(box, "x1", where), xml::attr_as<double>(box, "y1", where)}};
  const xml::Tree& pt = xml::child(step, "op_point", where);
  s.op_point = {xml::attr_as<double>(pt, "x", where), xml::attr_as<double>(pt, "y", where)};
  const xml::Tree& dev = xml::child(step, "device", where);
  s.device.serial = xml::attr(dev, "serial", where);
  s.device.resolution = {xml::attr_as<int>(dev, "w", where), xml::attr_as<int>(dev, "h", where)};

  s.activity_image = read_png(sd / "activity.png");
  s.widget_image = read_png(sd / "widget.png");
  return s;
}

}  // namespace

LitsScript load_script(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.xml";
  if (!fs::exists(manifest_path)) {
    throw ScriptError(fmt::format("missing {}", manifest_path.string()));
  }
  const xml::Tree manifest = xml::read_file(manifest_path);
  const xml::Tree& root = xml::child(manifest, "script", manifest_path.string());

  LitsScript script;
  script.id = xml::attr(root, "id", manifest_path.string());

  std::vector<const xml::Tree*> entries;
  for (const auto& [name, node] : root) {
    if (name == "step") entries.push_back(&node);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      const auto idx = xml::attr_as<std::size_t>(*entries[i], "index", "manifest.xml");
      if (idx != i) throw Error(fmt::format("manifest lists index {} at position {}", idx, i));
      script.steps.push_back(
          load_step(dir / step_dir_name(i, entries.size()), *entries[i]));
    } catch (const ScriptError&) {
      throw;
    } catch (const Error& e) {
      throw ScriptError(e.what(), i);
    }
  }
  for (const auto& v : validate_script(script)) {
    throw ScriptError("invariant violation: " + v.message, v.step);
  }
  return script;
}

}  // namespace visreplay
