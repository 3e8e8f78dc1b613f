#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "visreplay/candidates.hpp"
#include "visreplay/config.hpp"
#include "visreplay/device.hpp"
#include "visreplay/error.hpp"
#include "visreplay/layout.hpp"
#include "visreplay/recorder.hpp"
#include "visreplay/replay.hpp"
#include "visreplay/synth.hpp"

namespace visreplay::cli {

namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_stop{false};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::chrono::system_clock::time_point default_timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    return std::chrono::system_clock::time_point(std::chrono::seconds(std::atoll(epoch)));
  }
  return std::chrono::system_clock::now();
}

// Engine tunables shared by the subcommands that use them.
struct Overrides {
  double gamma = 0;
  double delta = 0;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;
  CLI::Option* gamma_opt = nullptr;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* steps_opt = nullptr;

  void attach(CLI::App* sub, bool fusion) {
    delta_opt = sub->add_option("--delta", delta, "ratio-test threshold");
    seed_opt = sub->add_option("--seed", seed, "RANSAC seed");
    if (fusion) {
      gamma_opt = sub->add_option("--gamma", gamma, "image-arm weight in [0, 1]");
      steps_opt = sub->add_option("--max-steps", max_steps, "steps to replay (0 = all)");
    }
  }
  void apply(EngineConfig& cfg) const {
    if (gamma_opt && gamma_opt->count()) cfg.gamma() = gamma;
    if (delta_opt && delta_opt->count()) cfg.delta() = delta;
    if (seed_opt && seed_opt->count()) cfg.seed() = seed;
    if (steps_opt && steps_opt->count()) cfg.fusion.max_steps = max_steps;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Screenshot-driven GUI record and replay", "visreplay"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "engine configuration XML")->check(CLI::ExistingFile);

  // record
  auto* record = app.add_subcommand("record", "record a scripted event list against a session");
  std::string rec_session, rec_events, rec_out, rec_serial;
  long long rec_time = 0;
  record->add_option("--session", rec_session, "session directory")->required();
  record->add_option("--events", rec_events, "event list XML")->required();
  record->add_option("--out", rec_out, "script root directory")->required();
  record->add_option("--serial", rec_serial, "device serial (default: the session's)");
  auto* rec_time_opt = record->add_option("--timestamp", rec_time, "UTC seconds since epoch");

  // replay
  auto* replay = app.add_subcommand("replay", "replay a script on one or more sessions");
  std::string rp_script;
  std::vector<std::string> rp_sessions, rp_reports;
  Overrides rp_over;
  replay->add_option("--script", rp_script, "script directory")->required();
  replay->add_option("--session", rp_sessions, "session directory (repeatable)")->required();
  replay->add_option("--report", rp_reports, "report XML, one per session")->required();
  rp_over.attach(replay, true);

  // characterize
  auto* charz = app.add_subcommand("characterize", "layout of one screenshot");
  std::string ch_screen, ch_out, ch_ocr;
  charz->add_option("--screen", ch_screen, "screenshot PNG")->required();
  charz->add_option("--out", ch_out, "layout XML")->required();
  charz->add_option("--ocr", ch_ocr, "OCR sidecar XML");

  // match
  auto* match = app.add_subcommand("match", "locate a widget crop on a screenshot");
  std::string m_widget, m_screen, m_out;
  Overrides m_over;
  match->add_option("--widget", m_widget, "widget PNG")->required();
  match->add_option("--screen", m_screen, "screenshot PNG")->required();
  match->add_option("--out", m_out, "candidates XML")->required();
  m_over.attach(match, false);

  // serve
  auto* serve = app.add_subcommand("serve", "interactive recorder over HTTP");
  std::string sv_session, sv_assets, sv_out = "scripts";
  int sv_port = 8080;
  serve->add_option("--session", sv_session, "session directory")->required();
  serve->add_option("--port", sv_port, "local port");
  serve->add_option("--assets", sv_assets, "recorder UI directory");
  serve->add_option("--out", sv_out, "script root directory");

  // report
  auto* report = app.add_subcommand("report", "merge replay reports into an accuracy table");
  std::vector<std::string> rep_in;
  std::string rep_out;
  report->add_option("--in", rep_in, "report XML files")->required();
  report->add_option("--out", rep_out, "table output file");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic session fixture");
  std::string sy_out, sy_serial = "SIM-0001";
  int sy_w = 720, sy_h = 1544;
  std::uint64_t sy_seed = 1, sy_walk = 7;
  std::size_t sy_events = 0;
  synth_cmd->add_option("--out", sy_out, "session directory")->required();
  synth_cmd->add_option("--width", sy_w, "screen width");
  synth_cmd->add_option("--height", sy_h, "screen height");
  synth_cmd->add_option("--content-seed", sy_seed, "content seed");
  synth_cmd->add_option("--serial", sy_serial, "device serial");
  synth_cmd->add_option("--events", sy_events, "also write a random-walk event list");
  synth_cmd->add_option("--walk-seed", sy_walk, "random-walk seed");

  std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  EngineConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    rp_over.apply(cfg);
    m_over.apply(cfg);
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  out << "effective config:\n" << config_to_xml(cfg);

  try {
    if (*record) {
      auto session = std::make_shared<const SimulatedSession>(load_session(rec_session));
      SimulatedSession copy = *session;
      if (!rec_serial.empty()) copy.serial = rec_serial;
      auto dev_session = std::make_shared<const SimulatedSession>(std::move(copy));
      SimulatedDevice device(dev_session);
      const SidecarOcr ocr = session_ocr(*dev_session);
      const auto when = rec_time_opt->count()
                            ? std::chrono::system_clock::time_point(std::chrono::seconds(rec_time))
                            : default_timestamp();
      std::vector<StepSummary> summaries;
      const LitsScript script =
          record_headless(device, load_events(rec_events), when, cfg.layout(), &ocr, &summaries);
      const auto dir = save_script(script, rec_out);
      std::size_t review = 0;
      for (const auto& s : summaries) review += s.needs_review;
      out << fmt::format("recorded {} steps ({} flagged for review) to {}\n", script.steps.size(),
                         review, dir.string());
      return kOk;
    }

    if (*replay) {
      if (rp_sessions.size() != rp_reports.size()) {
        err << "error: --session and --report must be given the same number of times\n";
        return kUsage;
      }
      const LitsScript script = load_script(rp_script);
      std::vector<std::unique_ptr<SimulatedDevice>> devices;
      std::vector<std::unique_ptr<SidecarOcr>> engines;
      std::vector<DeviceBackend*> backends;
      std::vector<const OcrEngine*> ocr;
      for (const auto& dir : rp_sessions) {
        auto session = std::make_shared<const SimulatedSession>(load_session(dir));
        engines.push_back(std::make_unique<SidecarOcr>(session_ocr(*session)));
        devices.push_back(std::make_unique<SimulatedDevice>(session));
        backends.push_back(devices.back().get());
        ocr.push_back(engines.back().get());
      }
      const auto reports = replay_on_devices(script, backends, cfg.fusion, ocr);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        write_text(rp_reports[i], report_to_xml(reports[i]));
      }
      out << summary_table(reports);
      for (const auto& r : reports) {
        if (r.aborted) {
          err << fmt::format("replay on {} aborted: {}\n", r.device, r.abort_reason);
          return kFailure;
        }
      }
      return kOk;
    }

    if (*charz) {
      const RasterImage img = read_png(ch_screen);
      LayoutMap layout = analyze_screen(img, cfg.layout());
      if (!ch_ocr.empty()) attach_text(layout, load_ocr_sidecar(ch_ocr, img.resolution()));
      write_text(ch_out, layout_to_xml(layout));
      out << fmt::format("{} widgets\n", layout.entries.size());
      return kOk;
    }

    if (*match) {
      const RasterImage widget = read_png(m_widget);
      const RasterImage screen = read_png(m_screen);
      const auto cands = locate_candidates(to_grayscale(widget), to_grayscale(screen), cfg.fusion.match);
      write_text(m_out, candidates_to_xml(cands, widget.resolution(), screen.resolution()));
      out << fmt::format("{} candidates\n", cands.size());
      return kOk;
    }

    if (*serve) {
      auto session = std::make_shared<const SimulatedSession>(load_session(sv_session));
      SimulatedDevice device(session);
      const SidecarOcr ocr = session_ocr(*session);
      RecordingSession rec(device, cfg.layout(), &ocr);
      RecorderService service(rec, sv_out, sv_assets);
      const int port = service.start(sv_port);
      out << fmt::format("recorder listening on http://127.0.0.1:{}/\n", port) << std::flush;
      g_stop = false;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      service.stop();
      return kOk;
    }

    if (*report) {
      std::vector<ReplayReport> reports;
      for (const auto& p : rep_in) reports.push_back(report_from_xml(read_text(p)));
      const std::string table = summary_table(reports);
      if (!rep_out.empty()) write_text(rep_out, table);
      out << table;
      return kOk;
    }

    if (*synth_cmd) {
      const SimulatedSession session = synth::news_app({{sy_w, sy_h}, sy_serial, sy_seed});
      save_session(session, sy_out);
      if (sy_events > 0) {
        write_text(fs::path(sy_out) / "events.xml",
                   events_to_xml(synth::random_walk(session, sy_events, sy_walk)));
      }
      out << fmt::format("wrote {} screens to {}\n", session.screens.size(), sy_out);
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace visreplay::cli
