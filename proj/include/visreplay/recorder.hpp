#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "visreplay/device.hpp"
#include "visreplay/error.hpp"
#include "visreplay/layout.hpp"
#include "visreplay/ocr.hpp"
#include "visreplay/script.hpp"

namespace visreplay {

/// The event referred to a screenshot that is no longer on screen.
class StaleToken : public Error {
 public:
  using Error::Error;
};

struct RecordEvent {
  std::string kind;  // op_name() spelling
  std::optional<RelPoint> point;
  std::optional<RelPoint> end;  // swipes
  std::string text;
  std::string token;
};

struct StepSummary {
  std::size_t index = 0;
  std::string op;
  RelBox widget_box;
  RelPoint op_point;
  std::string text;
  bool needs_review = false;
  bool hit = false;
  std::string screen_after;
};

/// Turns input events issued against the live device screen into LITS steps.
/// Widget boxes come from layout characterization of the screenshot the
/// event was issued against. All members are safe to call concurrently.
class RecordingSession {
 public:
  explicit RecordingSession(DeviceBackend& device, LayoutConfig cfg = {},
                            const OcrEngine* ocr = nullptr);

  /// Hex fingerprint of the current screenshot.
  std::string token() const;
  RasterImage screen() const;
  /// Layout of the current screenshot, with OCR text when an engine is set.
  LayoutMap layout() const;

  /// Throws StaleToken when `e.token` is not the current screen's token and
  /// ScriptError for malformed events.
  StepSummary on_event(const RecordEvent& e);

  /// Saves the script under `root` and starts a new one. Throws ScriptError
  /// when no step has been recorded.
  std::filesystem::path save(const std::filesystem::path& root,
                             std::chrono::system_clock::time_point when =
                                 std::chrono::system_clock::now());

  std::vector<StepSummary> steps() const;
  /// Current script, not yet saved.
  LitsScript script() const;

 private:
  struct Snapshot {
    std::string token;
    RasterImage image;
    std::shared_ptr<const LayoutMap> layout;
    std::vector<TextRegion> text;
  };
  const Snapshot& snapshot() const;  // requires mutex_

  DeviceBackend& device_;
  LayoutConfig cfg_;
  const OcrEngine* ocr_;
  mutable std::mutex mutex_;
  mutable std::optional<Snapshot> snap_;
  std::vector<OperationStep> steps_;
  std::vector<StepSummary> summaries_;
  std::optional<std::pair<std::string, LayoutEntry>> focused_;
};

/// Parses a scripted event list: `<events><event kind x y [x2 y2] [text]/>...</events>`.
/// Tokens are left empty; the headless recorder fills them in.
std::vector<RecordEvent> load_events(const std::filesystem::path& path);
std::string events_to_xml(const std::vector<RecordEvent>& events);

/// Feeds `events` to a fresh session against `device`, each issued against
/// the screen current at that moment, and returns the recorded script.
LitsScript record_headless(DeviceBackend& device, const std::vector<RecordEvent>& events,
                           std::chrono::system_clock::time_point when,
                           const LayoutConfig& cfg = {}, const OcrEngine* ocr = nullptr,
                           std::vector<StepSummary>* summaries = nullptr);

/// Local HTTP front end for one RecordingSession.
class RecorderService {
 public:
  RecorderService(RecordingSession& session, std::filesystem::path script_root,
                  std::filesystem::path assets = {});
  ~RecorderService();
  RecorderService(const RecorderService&) = delete;
  RecorderService& operator=(const RecorderService&) = delete;

  /// Binds 127.0.0.1:`port` (0 picks a free port) and serves in a background
  /// thread. Returns the bound port; throws Error when binding fails.
  int start(int port);
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace visreplay
