#pragma once

#include <filesystem>
#include <string>

#include "visreplay/replay.hpp"

namespace visreplay {

/// Every tunable of the engine, with the defaults of the owning modules.
struct EngineConfig {
  FusionConfig fusion;

  double& gamma() { return fusion.gamma; }
  double& delta() { return fusion.match.delta; }
  std::uint64_t& seed() { return fusion.match.ransac.seed; }
  LayoutConfig& layout() { return fusion.layout; }

  /// Throws ConfigError naming the first field out of range.
  void validate() const { fusion.validate(); }
};

/// `<config gamma delta seed canny_low canny_high dilation
/// dilation_reference_width group_gap line_overlap text_similarity
/// max_steps/>`; absent attributes keep their defaults.
EngineConfig load_config(const std::filesystem::path& path);
EngineConfig config_from_xml(const std::string& text);
std::string config_to_xml(const EngineConfig& cfg);

}  // namespace visreplay
