#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"

namespace visreplay {

struct DeviceMeta {
  std::string serial;
  Resolution resolution;

  friend bool operator==(const DeviceMeta&, const DeviceMeta&) = default;
};

namespace op {
struct Tap {
  friend bool operator==(const Tap&, const Tap&) = default;
};
struct LongPress {
  friend bool operator==(const LongPress&, const LongPress&) = default;
};
struct Swipe {
  RelPoint start;
  RelPoint end;
  friend bool operator==(const Swipe&, const Swipe&) = default;
};
struct TextInput {
  std::string payload;
  friend bool operator==(const TextInput&, const TextInput&) = default;
};
struct Back {
  friend bool operator==(const Back&, const Back&) = default;
};
}  // namespace op

using OperationKind = std::variant<op::Tap, op::LongPress, op::Swipe, op::TextInput, op::Back>;

/// "tap", "long_press", "swipe", "text_input" or "back".
std::string_view op_name(const OperationKind& kind);

/// Ground truth observed while recording against a simulated device: the
/// widget the operation hit and the screen it led to. Replay uses it to
/// decide step success.
struct Expectation {
  std::string widget_id;
  std::string screen;

  friend bool operator==(const Expectation&, const Expectation&) = default;
};

/// One recorded operation (the per-step part of the LITS 7-tuple).
struct OperationStep {
  OperationKind op;
  RasterImage activity_image;
  RasterImage widget_image;
  RelBox widget_box;
  RelPoint op_point;
  std::string text;
  DeviceMeta device;
  std::optional<Expectation> expect;

  bool has_widget() const { return widget_box != kFullScreen; }

  friend bool operator==(const OperationStep&, const OperationStep&) = default;
};

struct LitsScript {
  std::string id;
  std::vector<OperationStep> steps;

  friend bool operator==(const LitsScript&, const LitsScript&) = default;
};

/// `serial` + "-" + UTC timestamp formatted as YYYYMMDDThhmmssZ.
std::string make_script_id(std::string_view serial,
                           std::chrono::system_clock::time_point when);

/// Builds a step from pixel-space record data. Coordinates are normalized by
/// the device resolution. The box may extend to x1 == width / y1 == height,
/// meaning "through the last pixel"; the crop is clamped accordingly.
OperationStep make_step(const RasterImage& activity, const PixelBox& widget_box_px,
                        const Eigen::Vector2d& op_point_px, OperationKind kind,
                        std::string text, const DeviceMeta& device);

/// Step for operations without a widget (back, focus-less text entry).
OperationStep make_screen_step(const RasterImage& activity, OperationKind kind,
                               std::string text, const DeviceMeta& device);

struct Violation {
  std::optional<std::size_t> step;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::vector<Violation> validate_step(const OperationStep& step);
std::vector<Violation> validate_script(const LitsScript& script);

/// Writes `<root>/<script.id>/` and returns that directory.
std::filesystem::path save_script(const LitsScript& script,
                                  const std::filesystem::path& root);

/// Reads a directory produced by save_script (the `<script.id>` directory).
LitsScript load_script(const std::filesystem::path& dir);

/// Six fractional digits, the persisted precision of relative coordinates.
std::string format_fraction(double v);

}  // namespace visreplay
