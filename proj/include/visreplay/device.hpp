#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"
#include "visreplay/ocr.hpp"
#include "visreplay/script.hpp"

namespace visreplay {

struct HitResult {
  bool hit = false;
  std::string widget_id;
  /// Screen shown after the operation.
  std::string screen;

  friend bool operator==(const HitResult&, const HitResult&) = default;
};

/// What an operation would hit on the current screen, without performing it.
struct ProbeHit {
  std::string widget_id;
  std::string target;

  friend bool operator==(const ProbeHit&, const ProbeHit&) = default;
};

/// Ground-truth access offered by simulated devices only.
class GroundTruthProbe {
 public:
  virtual ~GroundTruthProbe() = default;
  virtual std::optional<ProbeHit> probe(const OperationKind& op, RelPoint at) const = 0;
  virtual bool has_widget(std::string_view widget_id) const = 0;
  virtual std::string current_screen() const = 0;
};

/// Capture and input injection for one device. `at` is the operated point;
/// for swipes it is the start and the end travels in the operation.
class DeviceBackend {
 public:
  virtual ~DeviceBackend() = default;
  virtual Resolution resolution() const = 0;
  virtual std::string serial() const = 0;
  virtual RasterImage capture() const = 0;
  virtual HitResult dispatch(const OperationKind& op, RelPoint at) = 0;
  virtual const GroundTruthProbe* probe() const { return nullptr; }
};

struct Region {
  PixelBox box;
  std::string op;  // op_name() of the accepted operation kind
  std::string target;
  std::string id;

  friend bool operator==(const Region&, const Region&) = default;
};

struct Screen {
  std::string name;
  RasterImage image;
  std::vector<Region> regions;
  std::vector<TextRegion> text;

  Resolution resolution() const { return image.resolution(); }
};

/// Screens, tappable regions and transitions standing in for a live app.
struct SimulatedSession {
  std::string serial;
  std::string initial;
  std::vector<Screen> screens;  // manifest order

  const Screen* find(std::string_view name) const;
  const Screen& screen(std::string_view name) const;
  Resolution resolution() const;
};

/// Throws Error naming the offending screen or region.
void validate_session(const SimulatedSession& session);

/// Reads `<dir>/session.xml` with its screenshots and optional OCR sidecars.
SimulatedSession load_session(const std::filesystem::path& dir);
void save_session(const SimulatedSession& session, const std::filesystem::path& dir);

/// OCR engine answering from the session's sidecars.
SidecarOcr session_ocr(const SimulatedSession& session);

struct DispatchRecord {
  std::string op;
  RelPoint at;
  HitResult result;
};

class SimulatedDevice : public DeviceBackend, public GroundTruthProbe {
 public:
  explicit SimulatedDevice(std::shared_ptr<const SimulatedSession> session);

  Resolution resolution() const override;
  std::string serial() const override { return session_->serial; }
  RasterImage capture() const override;
  HitResult dispatch(const OperationKind& op, RelPoint at) override;
  const GroundTruthProbe* probe() const override { return this; }

  std::optional<ProbeHit> probe(const OperationKind& op, RelPoint at) const override;
  bool has_widget(std::string_view widget_id) const override;
  std::string current_screen() const override { return current_; }

  const std::vector<DispatchRecord>& log() const { return log_; }
  const SimulatedSession& session() const { return *session_; }

 private:
  const Region* winning_region(const OperationKind& op, RelPoint at) const;

  std::shared_ptr<const SimulatedSession> session_;
  std::string current_;
  std::vector<std::string> history_;
  std::vector<DispatchRecord> log_;
};

/// Android bridge placeholder; every call throws NotImplemented.
class AdbDriver : public DeviceBackend {
 public:
  explicit AdbDriver(std::string serial) : serial_(std::move(serial)) {}
  Resolution resolution() const override;
  std::string serial() const override { return serial_; }
  RasterImage capture() const override;
  HitResult dispatch(const OperationKind& op, RelPoint at) override;

 private:
  std::string serial_;
};

/// iOS bridge placeholder; every call throws NotImplemented.
class WdaDriver : public DeviceBackend {
 public:
  explicit WdaDriver(std::string udid) : udid_(std::move(udid)) {}
  Resolution resolution() const override;
  std::string serial() const override { return udid_; }
  RasterImage capture() const override;
  HitResult dispatch(const OperationKind& op, RelPoint at) override;

 private:
  std::string udid_;
};

}  // namespace visreplay
