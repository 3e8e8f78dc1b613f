#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "visreplay/candidates.hpp"
#include "visreplay/device.hpp"
#include "visreplay/layout.hpp"
#include "visreplay/ocr.hpp"
#include "visreplay/script.hpp"

namespace visreplay {

struct FusionConfig {
  /// Weight of the image arm; the layout arm gets 1 - gamma.
  double gamma = 0.5;
  MatchConfig match;
  LayoutConfig layout;
  /// Steps executed per replay; 0 runs the whole script.
  std::size_t max_steps = 0;

  /// Throws ConfigError naming the first field out of range.
  void validate() const;
};

/// Index into `omega` of the candidate used by the image arm: the only one,
/// or the one whose center is nearest the layout candidate's center. Without
/// a layout candidate the first (best-scored) one is used.
std::optional<std::size_t> select_image_candidate(std::span<const RelBox> omega,
                                                  const std::optional<RelBox>& layout);

/// gamma * image + (1 - gamma) * layout, per component.
RelPoint blend(RelPoint image, RelPoint layout, double gamma);

/// Where both arms place a step's operated point on the replay screen.
struct ResolvedTarget {
  std::optional<CandidateBox> image_candidate;
  std::optional<CandidateBox> layout_candidate;
  std::optional<RelPoint> image_point;
  std::optional<RelPoint> layout_point;
  std::optional<RelPoint> point;
  /// Swipe end points, blended independently of the start.
  std::optional<RelPoint> image_end;
  std::optional<RelPoint> layout_end;
  std::optional<RelPoint> end;
};

/// Runs both matchers for one step. Holds feature and layout caches keyed
/// by image content, so one instance should serve one replay.
class TargetResolver {
 public:
  explicit TargetResolver(FusionConfig cfg, const OcrEngine* ocr = nullptr);

  ResolvedTarget resolve(const OperationStep& step, const RasterImage& screen);

  /// Address of the recorded widget in the recorded screenshot's layout.
  std::optional<LayoutEntry> recorded_entry(const OperationStep& step);

  const FusionConfig& config() const { return cfg_; }

 private:
  const FeatureSet& features(const RasterImage& img);
  const LayoutMap& layout(const RasterImage& img, bool with_text);

  FusionConfig cfg_;
  const OcrEngine* ocr_;
  std::map<std::uint64_t, std::shared_ptr<const FeatureSet>> features_;
  std::map<std::pair<std::uint64_t, bool>, std::shared_ptr<const LayoutMap>> layouts_;
};

ResolvedTarget resolve_target(const OperationStep& step, const RasterImage& screen,
                              const FusionConfig& cfg = {}, const OcrEngine* ocr = nullptr);

struct StepOutcome {
  std::size_t index = 0;
  std::string op;
  std::optional<CandidateBox> image_candidate;
  std::optional<CandidateBox> layout_candidate;
  std::optional<RelPoint> image_point;
  std::optional<RelPoint> layout_point;
  std::optional<RelPoint> dispatched_point;
  std::optional<RelPoint> dispatched_end;
  bool success = false;
  bool image_ok = false;
  bool layout_ok = false;
  bool final_ok = false;
  std::string note;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct ReplayReport {
  std::string script_id;
  std::string device;
  std::vector<StepOutcome> outcomes;
  /// Steps the replay set out to run; aborted replays execute fewer.
  std::size_t total_steps = 0;
  bool aborted = false;
  std::string abort_reason;

  friend bool operator==(const ReplayReport&, const ReplayReport&) = default;
};

/// Successful steps over total steps. Throws Error for an empty report.
double replay_accuracy(const ReplayReport& report);

/// Replays every step in order; failed steps do not stop the run. Device
/// errors end it with a partial, aborted report.
ReplayReport replay_script(const LitsScript& script, DeviceBackend& device,
                           const FusionConfig& cfg = {}, const OcrEngine* ocr = nullptr);

/// One independent replay per device, run concurrently.
std::vector<ReplayReport> replay_on_devices(const LitsScript& script,
                                            std::span<DeviceBackend* const> devices,
                                            const FusionConfig& cfg = {},
                                            std::span<const OcrEngine* const> ocr = {});

std::string report_to_xml(const ReplayReport& report);
ReplayReport report_from_xml(std::string_view xml_text);

/// Per-arm aggregation over one or more reports.
struct ArmSummary {
  std::size_t steps = 0;
  std::size_t image_ok = 0;
  std::size_t layout_ok = 0;
  std::size_t final_ok = 0;
  // Partition of the final successes by arm flags.
  std::size_t both = 0;
  std::size_t image_only = 0;
  std::size_t layout_only = 0;
  std::size_t neither = 0;

  double rate(std::size_t count) const {
    return steps == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(steps);
  }
  friend bool operator==(const ArmSummary&, const ArmSummary&) = default;
};

ArmSummary summarize(std::span<const ReplayReport> reports);

/// Plain-text table with one row per report plus a total row.
std::string summary_table(std::span<const ReplayReport> reports);

}  // namespace visreplay
