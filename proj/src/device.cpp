#include "visreplay/device.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

namespace {

const std::set<std::string, std::less<>> kRegionOps = {"tap", "long_press", "swipe", "text_input"};

}  // namespace

const Screen* SimulatedSession::find(std::string_view name) const {
  auto it = std::find_if(screens.begin(), screens.end(),
                         [&](const Screen& s) { return s.name == name; });
  return it == screens.end() ? nullptr : &*it;
}

const Screen& SimulatedSession::screen(std::string_view name) const {
  if (const Screen* s = find(name)) return *s;
  throw Error(fmt::format("session has no screen '{}'", name));
}

Resolution SimulatedSession::resolution() const { return screen(initial).resolution(); }

void validate_session(const SimulatedSession& session) {
  if (session.screens.empty()) throw Error("session has no screens");
  if (!session.find(session.initial)) {
    throw Error(fmt::format("initial screen '{}' does not exist", session.initial));
  }
  std::set<std::string, std::less<>> names;
  for (const Screen& s : session.screens) {
    if (s.name.empty()) throw Error("screen with empty name");
    if (!names.insert(s.name).second) throw Error(fmt::format("duplicate screen '{}'", s.name));
    if (s.resolution() != session.resolution()) {
      throw Error(fmt::format("screen '{}': resolution differs from the initial screen", s.name));
    }
  }
  for (const Screen& s : session.screens) {
    for (const Region& r : s.regions) {
      const std::string where = fmt::format("screen '{}' region '{}'", s.name, r.id);
      if (r.id.empty()) throw Error(fmt::format("screen '{}': region without id", s.name));
      if (!r.box.within(s.resolution())) {
        throw Error(fmt::format("{}: box ({},{})-({},{}) outside {}x{}", where, r.box.x0, r.box.y0,
                                r.box.x1, r.box.y1, s.resolution().width, s.resolution().height));
      }
      if (!kRegionOps.count(r.op)) throw Error(fmt::format("{}: unknown op '{}'", where, r.op));
      if (!session.find(r.target)) {
        throw Error(fmt::format("{}: transition to unknown screen '{}'", where, r.target));
      }
    }
    for (const TextRegion& t : s.text) {
      if (!t.box.within(s.resolution()) || t.text.empty()) {
        throw Error(fmt::format("screen '{}': invalid OCR region '{}'", s.name, t.text));
      }
    }
  }
}

SimulatedSession load_session(const std::filesystem::path& dir) {
  const auto manifest = dir / "session.xml";
  if (!std::filesystem::exists(manifest)) {
    throw Error(fmt::format("{}: missing session.xml", dir.string()));
  }
  const std::string where = manifest.string();
  const xml::Tree doc = xml::read_file(manifest);
  const xml::Tree& root = xml::child(doc, "session", where);

  SimulatedSession out;
  out.initial = xml::attr(root, "initial", where);
  out.serial = xml::maybe_attr(root, "serial").value_or(dir.filename().string());
  for (const auto& [name, node] : root) {
    if (name != "screen") continue;
    Screen s;
    s.name = xml::attr(node, "name", where);
    const std::string swhere = fmt::format("{}: screen '{}'", where, s.name);
    const auto png = dir / xml::attr(node, "png", swhere);
    if (!std::filesystem::exists(png)) {
      throw Error(fmt::format("{}: missing screen file {}", swhere, png.string()));
    }
    s.image = read_png(png);
    const Resolution declared{xml::attr_as<int>(node, "w", swhere), xml::attr_as<int>(node, "h", swhere)};
    if (declared != s.image.resolution()) {
      throw Error(fmt::format("{}: declared {}x{} but {} is {}x{}", swhere, declared.width,
                              declared.height, png.filename().string(), s.image.width(),
                              s.image.height()));
    }
    for (const auto& [rname, rnode] : node) {
      if (rname != "region") continue;
      Region r;
      r.id = xml::maybe_attr(rnode, "id").value_or("");
      const std::string rwhere = fmt::format("{} region '{}'", swhere, r.id);
      r.box = {xml::attr_as<int>(rnode, "x0", rwhere), xml::attr_as<int>(rnode, "y0", rwhere),
               xml::attr_as<int>(rnode, "x1", rwhere), xml::attr_as<int>(rnode, "y1", rwhere)};
      r.op = xml::attr(rnode, "op", rwhere);
      r.target = xml::attr(rnode, "target", rwhere);
      s.regions.push_back(std::move(r));
    }
    if (auto ocr = xml::maybe_attr(node, "ocr")) s.text = load_ocr_sidecar(dir / *ocr, declared);
    out.screens.push_back(std::move(s));
  }
  validate_session(out);
  return out;
}

void save_session(const SimulatedSession& session, const std::filesystem::path& dir) {
  validate_session(session);
  std::filesystem::create_directories(dir);
  xml::Tree doc;
  xml::Tree& root = doc.add_child("session", xml::Tree{});
  xml::set_attr(root, "initial", session.initial);
  xml::set_attr(root, "serial", session.serial);
  for (const Screen& s : session.screens) {
    xml::Tree& n = root.add_child("screen", xml::Tree{});
    xml::set_attr(n, "name", s.name);
    xml::set_attr(n, "png", s.name + ".png");
    xml::set_attr(n, "w", s.image.width());
    xml::set_attr(n, "h", s.image.height());
    write_png(s.image, dir / (s.name + ".png"));
    if (!s.text.empty()) {
      const std::string ocr = s.name + ".ocr.xml";
      xml::set_attr(n, "ocr", ocr);
      xml::write_file(xml::read_string(ocr_sidecar_xml(s.text)), dir / ocr);
    }
    for (const Region& r : s.regions) {
      xml::Tree& rn = n.add_child("region", xml::Tree{});
      xml::set_attr(rn, "x0", r.box.x0);
      xml::set_attr(rn, "y0", r.box.y0);
      xml::set_attr(rn, "x1", r.box.x1);
      xml::set_attr(rn, "y1", r.box.y1);
      xml::set_attr(rn, "op", r.op);
      xml::set_attr(rn, "target", r.target);
      xml::set_attr(rn, "id", r.id);
    }
  }
  xml::write_file(doc, dir / "session.xml");
}

SidecarOcr session_ocr(const SimulatedSession& session) {
  SidecarOcr ocr;
  for (const Screen& s : session.screens) {
    if (!s.text.empty()) ocr.add(s.image, s.text);
  }
  return ocr;
}

SimulatedDevice::SimulatedDevice(std::shared_ptr<const SimulatedSession> session)
    : session_(std::move(session)) {
  if (!session_) throw DeviceError("simulated device needs a session");
  validate_session(*session_);
  current_ = session_->initial;
}

Resolution SimulatedDevice::resolution() const { return session_->resolution(); }

RasterImage SimulatedDevice::capture() const { return session_->screen(current_).image; }

const Region* SimulatedDevice::winning_region(const OperationKind& op, RelPoint at) const {
  if (std::holds_alternative<op::Back>(op)) return nullptr;
  const Resolution res = resolution();
  const double x = at.x * res.width;
  const double y = at.y * res.height;
  const std::string_view kind = op_name(op);
  const Region* best = nullptr;
  for (const Region& r : session_->screen(current_).regions) {
    if (r.op != kind || !r.box.contains(x, y)) continue;
    if (!best || r.box.area() < best->box.area()) best = &r;
  }
  return best;
}

std::optional<ProbeHit> SimulatedDevice::probe(const OperationKind& op, RelPoint at) const {
  if (std::holds_alternative<op::Back>(op)) {
    if (history_.empty()) return std::nullopt;
    return ProbeHit{"", history_.back()};
  }
  if (const Region* r = winning_region(op, at)) return ProbeHit{r->id, r->target};
  return std::nullopt;
}

bool SimulatedDevice::has_widget(std::string_view widget_id) const {
  const auto& regions = session_->screen(current_).regions;
  return std::any_of(regions.begin(), regions.end(),
                     [&](const Region& r) { return r.id == widget_id; });
}

HitResult SimulatedDevice::dispatch(const OperationKind& op, RelPoint at) {
  HitResult result;
  if (std::holds_alternative<op::Back>(op)) {
    if (!history_.empty()) {
      current_ = history_.back();
      history_.pop_back();
      result.hit = true;
    }
  } else if (const Region* r = winning_region(op, at)) {
    result.hit = true;
    result.widget_id = r->id;
    if (r->target != current_) history_.push_back(current_);
    current_ = r->target;
  }
  result.screen = current_;
  log_.push_back({std::string(op_name(op)), at, result});
  return result;
}

namespace {

[[noreturn]] void not_implemented(std::string_view driver, std::string_view call) {
  throw NotImplemented(fmt::format("{} driver: {} is not implemented", driver, call));
}

}  // namespace

Resolution AdbDriver::resolution() const { not_implemented("adb", "resolution"); }
RasterImage AdbDriver::capture() const { not_implemented("adb", "capture"); }
HitResult AdbDriver::dispatch(const OperationKind&, RelPoint) { not_implemented("adb", "dispatch"); }

Resolution WdaDriver::resolution() const { not_implemented("wda", "resolution"); }
RasterImage WdaDriver::capture() const { not_implemented("wda", "capture"); }
HitResult WdaDriver::dispatch(const OperationKind&, RelPoint) { not_implemented("wda", "dispatch"); }

}  // namespace visreplay
