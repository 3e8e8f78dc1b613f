#include "visreplay/replay.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include <fmt/format.h>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

void FusionConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError(fmt::format("gamma must lie in [0, 1], got {}", gamma));
  }
  if (!(match.delta > 0.0 && match.delta <= 1.0)) {
    throw ConfigError(fmt::format("delta must lie in (0, 1], got {}", match.delta));
  }
  if (match.min_matches < 4) {
    throw ConfigError(fmt::format("min_matches must be >= 4, got {}", match.min_matches));
  }
  if (match.min_votes < 2) {
    throw ConfigError(fmt::format("min_votes must be >= 2, got {}", match.min_votes));
  }
  if (!(match.ransac.inlier_threshold > 0)) {
    throw ConfigError(fmt::format("inlier threshold must be > 0, got {}", match.ransac.inlier_threshold));
  }
  layout.validate();
}

std::optional<std::size_t> select_image_candidate(std::span<const RelBox> omega,
                                                  const std::optional<RelBox>& layout) {
  if (omega.empty()) return std::nullopt;
  if (omega.size() == 1 || !layout) return 0;
  const RelPoint target = layout->center();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double d = distance(omega[i].center(), target);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

RelPoint blend(RelPoint image, RelPoint layout, double gamma) {
  return {gamma * image.x + (1.0 - gamma) * layout.x, gamma * image.y + (1.0 - gamma) * layout.y};
}

TargetResolver::TargetResolver(FusionConfig cfg, const OcrEngine* ocr)
    : cfg_(std::move(cfg)), ocr_(ocr) {
  cfg_.validate();
}

const FeatureSet& TargetResolver::features(const RasterImage& img) {
  auto& slot = features_[fingerprint(img)];
  if (!slot) slot = std::make_shared<const FeatureSet>(extract_features(to_grayscale(img), cfg_.match.sift));
  return *slot;
}

const LayoutMap& TargetResolver::layout(const RasterImage& img, bool with_text) {
  auto& slot = layouts_[{fingerprint(img), with_text}];
  if (!slot) {
    slot = std::make_shared<const LayoutMap>(
        analyze_screen(img, cfg_.layout, with_text ? ocr_ : nullptr));
  }
  return *slot;
}

std::optional<LayoutEntry> TargetResolver::recorded_entry(const OperationStep& step) {
  const LayoutMap& rec = layout(step.activity_image, false);
  if (rec.empty()) return std::nullopt;
  const PixelBox box = to_pixels(step.widget_box, rec.resolution);
  const LayoutEntry* best = nullptr;
  double best_iou = 0;
  for (const auto& e : rec.entries) {
    const double v = iou(e.box, box);
    if (v > best_iou) {
      best_iou = v;
      best = &e;
    }
  }
  if (best) return *best;
  return tuple_of_point(rec, step.widget_box.center());
}

ResolvedTarget TargetResolver::resolve(const OperationStep& step, const RasterImage& screen) {
  ResolvedTarget out;
  const Resolution res = screen.resolution();

  const FeatureSet& wf = features(step.widget_image);
  const FeatureSet& sf = features(screen);
  const auto omega =
      locate_candidates(wf, step.widget_image.resolution(), sf, res, cfg_.match);

  if (auto entry = recorded_entry(step)) {
    out.layout_candidate = locate_by_tuple(layout(screen, true), entry->tuple, step.text, cfg_.layout);
  }

  std::optional<RelBox> layout_box;
  if (out.layout_candidate) layout_box = to_relative(out.layout_candidate->box, res);
  std::vector<RelBox> omega_rel;
  for (const auto& c : omega) omega_rel.push_back(to_relative(c.box, res));
  std::optional<RelBox> image_box;
  if (auto i = select_image_candidate(omega_rel, layout_box)) {
    out.image_candidate = omega[*i];
    image_box = omega_rel[*i];
  }

  const RelPoint f = step.widget_box.local_fraction(step.op_point);
  const auto* swipe = std::get_if<op::Swipe>(&step.op);
  const RelPoint fe = swipe ? step.widget_box.local_fraction(swipe->end) : RelPoint{};
  if (image_box) {
    out.image_point = image_box->at_fraction(f);
    if (swipe) out.image_end = image_box->at_fraction(fe);
  }
  if (layout_box) {
    out.layout_point = layout_box->at_fraction(f);
    if (swipe) out.layout_end = layout_box->at_fraction(fe);
  }
  if (image_box && layout_box) {
    out.point = blend(*out.image_point, *out.layout_point, cfg_.gamma);
    if (swipe) out.end = blend(*out.image_end, *out.layout_end, cfg_.gamma);
  } else if (image_box) {
    out.point = out.image_point;
    out.end = out.image_end;
  } else if (layout_box) {
    out.point = out.layout_point;
    out.end = out.layout_end;
  }
  return out;
}

ResolvedTarget resolve_target(const OperationStep& step, const RasterImage& screen,
                              const FusionConfig& cfg, const OcrEngine* ocr) {
  TargetResolver resolver(cfg, ocr);
  return resolver.resolve(step, screen);
}

double replay_accuracy(const ReplayReport& report) {
  if (report.total_steps == 0) throw Error("replay accuracy of an empty report is undefined");
  const auto ok = std::count_if(report.outcomes.begin(), report.outcomes.end(),
                                [](const StepOutcome& o) { return o.success; });
  return static_cast<double>(ok) / static_cast<double>(report.total_steps);
}

namespace {

RelPoint clamp_unit(RelPoint p) {
  return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
}

// The operation to dispatch, with swipe end points moved to the replay
// location.
OperationKind relocated(const OperationKind& op, RelPoint start, std::optional<RelPoint> end) {
  if (const auto* s = std::get_if<op::Swipe>(&op)) {
    return op::Swipe{start, clamp_unit(end.value_or(s->end))};
  }
  return op;
}

bool matches(const std::optional<ProbeHit>& hit, const std::optional<Expectation>& expect) {
  if (!hit) return false;
  if (!expect) return true;
  return hit->widget_id == expect->widget_id && hit->target == expect->screen;
}

}  // namespace

ReplayReport replay_script(const LitsScript& script, DeviceBackend& device, const FusionConfig& cfg,
                           const OcrEngine* ocr) {
  TargetResolver resolver(cfg, ocr);
  ReplayReport report;
  report.script_id = script.id;
  report.total_steps = cfg.max_steps == 0 ? script.steps.size()
                                          : std::min(cfg.max_steps, script.steps.size());
  try {
    report.device = device.serial();
    for (std::size_t i = 0; i < report.total_steps; ++i) {
      const OperationStep& step = script.steps[i];
      StepOutcome o;
      o.index = i;
      o.op = std::string(op_name(step.op));
      const RasterImage screen = device.capture();
      const GroundTruthProbe* truth = device.probe();

      if (!step.has_widget()) {
        o.dispatched_point = step.op_point;
        if (truth) {
          o.image_ok = o.layout_ok = matches(truth->probe(step.op, step.op_point), step.expect);
        }
        o.note = "full screen";
      } else {
        const ResolvedTarget t = resolver.resolve(step, screen);
        o.image_candidate = t.image_candidate;
        o.layout_candidate = t.layout_candidate;
        o.image_point = t.image_point;
        o.layout_point = t.layout_point;
        o.dispatched_point = t.point;
        o.dispatched_end = t.end;
        if (truth && t.image_point) {
          o.image_ok = matches(truth->probe(relocated(step.op, *t.image_point, t.image_end),
                                            *t.image_point),
                               step.expect);
        }
        if (truth && t.layout_point) {
          o.layout_ok = matches(truth->probe(relocated(step.op, *t.layout_point, t.layout_end),
                                             *t.layout_point),
                                step.expect);
        }
        if (!t.point) o.note = "no candidate";
      }
      if (truth && step.expect && !step.expect->widget_id.empty() &&
          !truth->has_widget(step.expect->widget_id)) {
        o.note = "missing widget";
      }

      if (o.dispatched_point) {
        const RelPoint at = clamp_unit(*o.dispatched_point);
        const HitResult hit = device.dispatch(relocated(step.op, at, o.dispatched_end), at);
        o.success = hit.hit && (!step.expect || (hit.widget_id == step.expect->widget_id &&
                                                 hit.screen == step.expect->screen));
      }
      o.final_ok = o.success;
      report.outcomes.push_back(std::move(o));
    }
  } catch (const DeviceError& e) {
    report.aborted = true;
    report.abort_reason = e.what();
  }
  return report;
}

std::vector<ReplayReport> replay_on_devices(const LitsScript& script,
                                            std::span<DeviceBackend* const> devices,
                                            const FusionConfig& cfg,
                                            std::span<const OcrEngine* const> ocr) {
  if (!ocr.empty() && ocr.size() != devices.size()) {
    throw Error("replay_on_devices: one OCR engine per device expected");
  }
  std::vector<std::future<ReplayReport>> jobs;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const OcrEngine* engine = ocr.empty() ? nullptr : ocr[i];
    jobs.push_back(std::async(std::launch::async, [&, i, engine] {
      return replay_script(script, *devices[i], cfg, engine);
    }));
  }
  std::vector<ReplayReport> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

namespace {

void put_point(xml::Tree& n, const std::string& prefix, const std::optional<RelPoint>& p) {
  if (!p) return;
  xml::set_attr(n, prefix + "x", format_fraction(p->x));
  xml::set_attr(n, prefix + "y", format_fraction(p->y));
}

std::optional<RelPoint> get_point(const xml::Tree& n, const std::string& prefix,
                                  const std::string& where) {
  if (!xml::maybe_attr(n, prefix + "x")) return std::nullopt;
  return RelPoint{xml::attr_as<double>(n, prefix + "x", where),
                  xml::attr_as<double>(n, prefix + "y", where)};
}

void put_candidate(xml::Tree& parent, const std::string& name, const std::optional<CandidateBox>& c) {
  if (!c) return;
  xml::Tree& n = parent.add_child(name, xml::Tree{});
  xml::set_attr(n, "x0", c->box.x0);
  xml::set_attr(n, "y0", c->box.y0);
  xml::set_attr(n, "x1", c->box.x1);
  xml::set_attr(n, "y1", c->box.y1);
  xml::set_attr(n, "score", fmt::format("{:.6f}", c->score));
  xml::set_attr(n, "support", c->support);
  xml::set_attr(n, "homography", c->from_homography ? 1 : 0);
}

std::optional<CandidateBox> get_candidate(const xml::Tree& parent, const std::string& name,
                                          const std::string& where) {
  auto n = parent.get_child_optional(name);
  if (!n) return std::nullopt;
  CandidateBox c;
  c.box = {xml::attr_as<int>(*n, "x0", where), xml::attr_as<int>(*n, "y0", where),
           xml::attr_as<int>(*n, "x1", where), xml::attr_as<int>(*n, "y1", where)};
  c.score = xml::attr_as<double>(*n, "score", where);
  c.support = xml::attr_as<std::size_t>(*n, "support", where);
  c.from_homography = xml::attr_as<int>(*n, "homography", where) != 0;
  return c;
}

}  // namespace

std::string report_to_xml(const ReplayReport& report) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("report", xml::Tree{});
  xml::set_attr(root, "script", report.script_id);
  xml::set_attr(root, "device", report.device);
  xml::set_attr(root, "steps", report.total_steps);
  if (report.total_steps > 0) {
    xml::set_attr(root, "accuracy", fmt::format("{:.6f}", replay_accuracy(report)));
  }
  xml::set_attr(root, "aborted", report.aborted ? 1 : 0);
  if (report.aborted) xml::set_attr(root, "reason", report.abort_reason);
  for (const StepOutcome& o : report.outcomes) {
    xml::Tree& n = root.add_child("step", xml::Tree{});
    xml::set_attr(n, "index", o.index);
    xml::set_attr(n, "op", o.op);
    xml::set_attr(n, "success", o.success ? 1 : 0);
    xml::set_attr(n, "I", o.image_ok ? 1 : 0);
    xml::set_attr(n, "L", o.layout_ok ? 1 : 0);
    xml::set_attr(n, "F", o.final_ok ? 1 : 0);
    put_point(n, "", o.dispatched_point);
    put_point(n, "end_", o.dispatched_end);
    put_point(n, "image_", o.image_point);
    put_point(n, "layout_", o.layout_point);
    if (!o.note.empty()) xml::set_attr(n, "note", o.note);
    put_candidate(n, "image_candidate", o.image_candidate);
    put_candidate(n, "layout_candidate", o.layout_candidate);
  }
  return xml::to_string(doc);
}

ReplayReport report_from_xml(std::string_view xml_text) {
  const std::string where = "report";
  const xml::Tree doc = xml::read_string(std::string(xml_text));
  const xml::Tree& root = xml::child(doc, "report", where);
  ReplayReport r;
  r.script_id = xml::attr(root, "script", where);
  r.device = xml::attr(root, "device", where);
  r.total_steps = xml::attr_as<std::size_t>(root, "steps", where);
  r.aborted = xml::attr_as<int>(root, "aborted", where) != 0;
  r.abort_reason = xml::maybe_attr(root, "reason").value_or("");
  for (const auto& [name, n] : root) {
    if (name != "step") continue;
    StepOutcome o;
    o.index = xml::attr_as<std::size_t>(n, "index", where);
    o.op = xml::attr(n, "op", where);
    o.success = xml::attr_as<int>(n, "success", where) != 0;
    o.image_ok = xml::attr_as<int>(n, "I", where) != 0;
    o.layout_ok = xml::attr_as<int>(n, "L", where) != 0;
    o.final_ok = xml::attr_as<int>(n, "F", where) != 0;
    o.dispatched_point = get_point(n, "", where);
    o.dispatched_end = get_point(n, "end_", where);
    o.image_point = get_point(n, "image_", where);
    o.layout_point = get_point(n, "layout_", where);
    o.note = xml::maybe_attr(n, "note").value_or("");
    o.image_candidate = get_candidate(n, "image_candidate", where);
    o.layout_candidate = get_candidate(n, "layout_candidate", where);
    r.outcomes.push_back(std::move(o));
  }
  if (r.outcomes.size() > r.total_steps) {
    throw Error(fmt::format("report: {} outcomes for {} steps", r.outcomes.size(), r.total_steps));
  }
  return r;
}

ArmSummary summarize(std::span<const ReplayReport> reports) {
  ArmSummary s;
  for (const auto& r : reports) {
    s.steps += r.total_steps;
    for (const auto& o : r.outcomes) {
      s.image_ok += o.image_ok;
      s.layout_ok += o.layout_ok;
      if (!o.final_ok) continue;
      ++s.final_ok;
      if (o.image_ok && o.layout_ok) {
        ++s.both;
      } else if (o.image_ok) {
        ++s.image_only;
      } else if (o.layout_ok) {
        ++s.layout_only;
      } else {
        ++s.neither;
      }
    }
  }
  return s;
}

std::string summary_table(std::span<const ReplayReport> reports) {
  std::string out = fmt::format("{:<32} {:<16} {:>6} {:>8} {:>8} {:>8}  {:>5} {:>5} {:>5} {:>5}\n",
                                "script", "device", "steps", "I%", "L%", "F%", "I+L", "I", "L",
                                "none");
  auto row = [&](const std::string& script, const std::string& device, const ArmSummary& s) {
    out += fmt::format("{:<32} {:<16} {:>6} {:>8.2f} {:>8.2f} {:>8.2f}  {:>5} {:>5} {:>5} {:>5}\n",
                       script, device, s.steps, 100 * s.rate(s.image_ok), 100 * s.rate(s.layout_ok),
                       100 * s.rate(s.final_ok), s.both, s.image_only, s.layout_only, s.neither);
  };
  for (const auto& r : reports) row(r.script_id, r.device, summarize(std::span(&r, 1)));
  row("total", "", summarize(reports));
  return out;
}

}  // namespace visreplay
