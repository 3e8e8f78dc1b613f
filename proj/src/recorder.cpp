#include "visreplay/recorder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <sys/socket.h>

#include <fmt/format.h>
#include <httplib.h>

#include "xml_io.hpp"

namespace visreplay {

RecordingSession::RecordingSession(DeviceBackend& device, LayoutConfig cfg, const OcrEngine* ocr)
    : device_(device), cfg_(std::move(cfg)), ocr_(ocr) {
  cfg_.validate();
}

const RecordingSession::Snapshot& RecordingSession::snapshot() const {
  RasterImage img = device_.capture();
  const std::string token = fmt::format("{:016x}", fingerprint(img));
  if (!snap_ || snap_->token != token) {
    Snapshot s;
    s.token = token;
    s.text = ocr_ ? ocr_->extract(img) : std::vector<TextRegion>{};
    LayoutMap layout = characterize(extract_widget_boxes(to_grayscale(img), cfg_), img.resolution(), cfg_);
    attach_text(layout, s.text);
    s.layout = std::make_shared<const LayoutMap>(std::move(layout));
    s.image = std::move(img);
    snap_ = std::move(s);
  }
  return *snap_;
}

std::string RecordingSession::token() const {
  std::lock_guard lock(mutex_);
  return snapshot().token;
}

RasterImage RecordingSession::screen() const {
  std::lock_guard lock(mutex_);
  return snapshot().image;
}

LayoutMap RecordingSession::layout() const {
  std::lock_guard lock(mutex_);
  return *snapshot().layout;
}

namespace {

OperationKind kind_from_event(const RecordEvent& e) {
  if (e.kind == "tap") return op::Tap{};
  if (e.kind == "long_press") return op::LongPress{};
  if (e.kind == "text_input") return op::TextInput{e.text};
  if (e.kind == "back") return op::Back{};
  if (e.kind == "swipe") {
    if (!e.point || !e.end) throw ScriptError("swipe event needs start and end points");
    return op::Swipe{*e.point, *e.end};
  }
  throw ScriptError(fmt::format("unknown event kind '{}'", e.kind));
}

}  // namespace

StepSummary RecordingSession::on_event(const RecordEvent& e) {
  std::lock_guard lock(mutex_);
  const Snapshot& snap = snapshot();
  if (e.token != snap.token) throw StaleToken("screen changed since the event was issued; refresh");

  OperationKind kind = kind_from_event(e);
  for (const auto& p : {e.point, e.end}) {
    if (p && !p->in_unit_square()) throw ScriptError("event point outside [0,1]");
  }
  const Resolution res = snap.image.resolution();
  const DeviceMeta meta{device_.serial(), res};
  const bool text_input = std::holds_alternative<op::TextInput>(kind);

  std::optional<LayoutEntry> entry;
  std::optional<RelPoint> point = e.point;
  if (text_input && !point && focused_ && focused_->first == snap.token) {
    entry = focused_->second;
    const auto c = entry->box.center();
    point = to_relative(c.x(), c.y(), res);
  } else if (point && !std::holds_alternative<op::Back>(kind)) {
    entry = tuple_of_point(*snap.layout, *point);
  } else if (!std::holds_alternative<op::Back>(kind) && !text_input) {
    throw ScriptError(fmt::format("{} event needs a point", e.kind));
  }

  bool review = false;
  OperationStep step;
  if (entry) {
    const Eigen::Vector2d px(std::clamp(point->x * res.width, 0.0, res.width - 1.0),
                             std::clamp(point->y * res.height, 0.0, res.height - 1.0));
    PixelBox box = entry->box;
    if (!box.contains(px.x(), px.y())) {
      const int ix = static_cast<int>(std::floor(px.x()));
      const int iy = static_cast<int>(std::floor(px.y()));
      box = bounding_union(box, PixelBox{ix, iy, std::min(ix + 1, res.width - 1),
                                         std::min(iy + 1, res.height - 1)});
      review = true;
    }
    std::string text = text_input ? e.text : entry->text;
    step = make_step(snap.image, box, px, std::move(kind), std::move(text), meta);
  } else if (point) {
    // No layout at all: keep the point, address the whole screen.
    const Eigen::Vector2d px(point->x * res.width, point->y * res.height);
    step = make_step(snap.image, PixelBox{0, 0, res.width, res.height}, px, std::move(kind),
                     text_input ? e.text : std::string{}, meta);
    review = true;
  } else {
    step = make_screen_step(snap.image, std::move(kind), text_input ? e.text : std::string{}, meta);
  }

  const HitResult hit = device_.dispatch(step.op, step.op_point);
  if (hit.hit) step.expect = Expectation{hit.widget_id, hit.screen};
  review = review || !hit.hit;

  focused_.reset();
  if (entry && std::holds_alternative<op::Tap>(step.op)) {
    focused_.emplace(fmt::format("{:016x}", fingerprint(device_.capture())), *entry);
  }

  StepSummary s{steps_.size(), std::string(op_name(step.op)), step.widget_box, step.op_point,
                step.text, review, hit.hit, hit.screen};
  steps_.push_back(std::move(step));
  summaries_.push_back(s);
  return s;
}

std::filesystem::path RecordingSession::save(const std::filesystem::path& root,
                                             std::chrono::system_clock::time_point when) {
  std::lock_guard lock(mutex_);
  if (steps_.empty()) throw ScriptError("nothing recorded since the last save");
  LitsScript script{make_script_id(device_.serial(), when), steps_};
  auto dir = save_script(script, root);
  steps_.clear();
  summaries_.clear();
  focused_.reset();
  return dir;
}

std::vector<StepSummary> RecordingSession::steps() const {
  std::lock_guard lock(mutex_);
  return summaries_;
}

LitsScript RecordingSession::script() const {
  std::lock_guard lock(mutex_);
  return {"", steps_};
}

std::vector<RecordEvent> load_events(const std::filesystem::path& path) {
  const std::string where = path.string();
  const xml::Tree doc = xml::read_file(path);
  std::vector<RecordEvent> out;
  for (const auto& [name, n] : xml::child(doc, "events", where)) {
    if (name != "event") continue;
    RecordEvent e;
    e.kind = xml::attr(n, "kind", where);
    if (xml::maybe_attr(n, "x")) {
      e.point = RelPoint{xml::attr_as<double>(n, "x", where), xml::attr_as<double>(n, "y", where)};
    }
    if (xml::maybe_attr(n, "x2")) {
      e.end = RelPoint{xml::attr_as<double>(n, "x2", where), xml::attr_as<double>(n, "y2", where)};
    }
    e.text = xml::maybe_attr(n, "text").value_or("");
    out.push_back(std::move(e));
  }
  return out;
}

std::string events_to_xml(const std::vector<RecordEvent>& events) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("events", xml::Tree{});
  for (const auto& e : events) {
    xml::Tree& n = root.add_child("event", xml::Tree{});
    xml::set_attr(n, "kind", e.kind);
    if (e.point) {
      xml::set_attr(n, "x", format_fraction(e.point->x));
      xml::set_attr(n, "y", format_fraction(e.point->y));
    }
    if (e.end) {
      xml::set_attr(n, "x2", format_fraction(e.end->x));
      xml::set_attr(n, "y2", format_fraction(e.end->y));
    }
    if (!e.text.empty()) xml::set_attr(n, "text", e.text);
  }
  return xml::to_string(doc);
}

LitsScript record_headless(DeviceBackend& device, const std::vector<RecordEvent>& events,
                           std::chrono::system_clock::time_point when, const LayoutConfig& cfg,
                           const OcrEngine* ocr, std::vector<StepSummary>* summaries) {
  if (events.empty()) throw ScriptError("no events to record");
  RecordingSession session(device, cfg, ocr);
  for (std::size_t i = 0; i < events.size(); ++i) {
    RecordEvent e = events[i];
    e.token = session.token();
    try {
      session.on_event(e);
    } catch (const ScriptError& err) {
      throw ScriptError(err.what(), i);
    }
  }
  if (summaries) *summaries = session.steps();
  LitsScript script = session.script();
  script.id = make_script_id(device.serial(), when);
  return script;
}

// ---------------------------------------------------------------------------
// HTTP front end

namespace {

constexpr const char* kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>recorder</title></head>
<body>
<img id="screen" src="/screen" alt="device screen">
<p>Endpoints: GET /screen, GET /layout, GET /session, POST /event, POST /save.</p>
</body></html>
)";

std::string summary_xml(const std::vector<StepSummary>& steps, const std::string& token) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("session", xml::Tree{});
  xml::set_attr(root, "token", token);
  xml::set_attr(root, "steps", steps.size());
  for (const auto& s : steps) {
    xml::Tree& n = root.add_child("step", xml::Tree{});
    xml::set_attr(n, "index", s.index);
    xml::set_attr(n, "op", s.op);
    xml::set_attr(n, "x0", format_fraction(s.widget_box.top_left.x));
    xml::set_attr(n, "y0", format_fraction(s.widget_box.top_left.y));
    xml::set_attr(n, "x1", format_fraction(s.widget_box.bottom_right.x));
    xml::set_attr(n, "y1", format_fraction(s.widget_box.bottom_right.y));
    xml::set_attr(n, "x", format_fraction(s.op_point.x));
    xml::set_attr(n, "y", format_fraction(s.op_point.y));
    xml::set_attr(n, "text", s.text);
    xml::set_attr(n, "review", s.needs_review ? 1 : 0);
    xml::set_attr(n, "hit", s.hit ? 1 : 0);
    xml::set_attr(n, "screen", s.screen_after);
  }
  return xml::to_string(doc);
}

double parse_number(const std::string& raw, const char* name) {
  std::istringstream in(raw);
  in.imbue(std::locale::classic());
  double v = 0;
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw ScriptError(fmt::format("parameter '{}' has invalid value '{}'", name, raw));
  }
  return v;
}

RecordEvent event_from_request(const httplib::Request& req) {
  auto field = [&](const char* name) -> std::optional<std::string> {
    if (req.has_param(name)) return req.get_param_value(name);
    return std::nullopt;
  };
  std::optional<xml::Tree> body;
  if (!req.body.empty() && req.body.find('<') != std::string::npos) {
    body = xml::child(xml::read_string(req.body), "event", "event");
  }
  auto get = [&](const char* name) -> std::optional<std::string> {
    if (body) return xml::maybe_attr(*body, name);
    return field(name);
  };
  RecordEvent e;
  e.kind = get("kind").value_or("");
  e.token = get("token").value_or("");
  e.text = get("text").value_or("");
  auto x = get("x");
  auto y = get("y");
  if (x && y) e.point = RelPoint{parse_number(*x, "x"), parse_number(*y, "y")};
  auto x2 = get("x2");
  auto y2 = get("y2");
  if (x2 && y2) e.end = RelPoint{parse_number(*x2, "x2"), parse_number(*y2, "y2")};
  return e;
}

std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

struct RecorderService::Impl {
  RecordingSession& session;
  std::filesystem::path root;
  std::filesystem::path assets;
  httplib::Server server;
  std::thread worker;

  Impl(RecordingSession& s, std::filesystem::path r, std::filesystem::path a)
      : session(s), root(std::move(r)), assets(std::move(a)) {
    // Exclusive binding so that a second service cannot share the port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  void routes() {
    server.Get("/screen", [this](const httplib::Request&, httplib::Response& res) {
      const RasterImage img = session.screen();
      const auto png = encode_png(img);
      res.set_header("X-Screenshot-Token", fmt::format("{:016x}", fingerprint(img)));
      res.set_header("Cache-Control", "no-store");
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    server.Get("/layout", [this](const httplib::Request&, httplib::Response& res) {
      res.set_header("X-Screenshot-Token", session.token());
      res.set_content(layout_to_xml(session.layout()), "application/xml");
    });
    server.Get("/session", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(summary_xml(session.steps(), session.token()), "application/xml");
    });
    server.Post("/event", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const StepSummary s = session.on_event(event_from_request(req));
        res.set_header("X-Screenshot-Token", session.token());
        res.set_content(summary_xml({s}, session.token()), "application/xml");
      } catch (const StaleToken& e) {
        res.status = 409;
        res.set_content(fmt::format("refresh: {}\n", e.what()), "text/plain");
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(fmt::format("{}\n", e.what()), "text/plain");
      }
    });
    server.Post("/save", [this](const httplib::Request&, httplib::Response& res) {
      try {
        const auto dir = session.save(root);
        xml::Tree doc;
        xml::Tree& n = doc.add_child("saved", xml::Tree{});
        xml::set_attr(n, "id", dir.filename().string());
        xml::set_attr(n, "path", dir.string());
        res.set_content(xml::to_string(doc), "application/xml");
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(fmt::format("{}\n", e.what()), "text/plain");
      }
    });
    server.Get("/", [this](const httplib::Request&, httplib::Response& res) {
      const auto index = assets / "index.html";
      if (!assets.empty() && std::filesystem::exists(index)) {
        res.set_content(read_text_file(index), "text/html");
      } else {
        res.set_content(kFallbackPage, "text/html");
      }
    });
    if (!assets.empty() && std::filesystem::is_directory(assets)) {
      server.set_mount_point("/assets", assets.string());
    }
  }
};

RecorderService::RecorderService(RecordingSession& session, std::filesystem::path script_root,
                                 std::filesystem::path assets)
    : impl_(std::make_unique<Impl>(session, std::move(script_root), std::move(assets))) {}

RecorderService::~RecorderService() { stop(); }

int RecorderService::start(int port) {
  if (impl_->worker.joinable()) throw Error("recorder service already running");
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port("127.0.0.1");
    if (bound <= 0) throw Error("cannot bind a local port");
  } else if (!impl_->server.bind_to_port("127.0.0.1", port)) {
    throw Error(fmt::format("port {} is not available", port));
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void RecorderService::stop() {
  if (!impl_ || !impl_->worker.joinable()) return;
  impl_->server.stop();
  impl_->worker.join();
}

bool RecorderService::running() const { return impl_->server.is_running(); }

}  // namespace visreplay
