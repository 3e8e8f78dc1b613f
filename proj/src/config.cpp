#include "visreplay/config.hpp"

#include <fstream>
#include <sstream>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

namespace {

template <typename T>
void read_field(const xml::Tree& node, const char* name, T& field) {
  if (!xml::maybe_attr(node, name)) return;
  try {
    field = xml::attr_as<T>(node, name, "config");
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

EngineConfig config_from_xml(const std::string& text) {
  xml::Tree doc;
  try {
    doc = xml::read_string(text);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  auto root = doc.get_child_optional("config");
  if (!root) throw ConfigError("config: missing <config> element");
  EngineConfig cfg;
  read_field(*root, "gamma", cfg.fusion.gamma);
  read_field(*root, "delta", cfg.fusion.match.delta);
  read_field(*root, "seed", cfg.fusion.match.ransac.seed);
  read_field(*root, "canny_low", cfg.fusion.layout.canny.low);
  read_field(*root, "canny_high", cfg.fusion.layout.canny.high);
  read_field(*root, "dilation", cfg.fusion.layout.dilation_radius);
  read_field(*root, "dilation_reference_width", cfg.fusion.layout.dilation_reference_width);
  read_field(*root, "group_gap", cfg.fusion.layout.group_gap);
  read_field(*root, "line_overlap", cfg.fusion.layout.line_overlap);
  read_field(*root, "text_similarity", cfg.fusion.layout.text_similarity);
  read_field(*root, "max_steps", cfg.fusion.max_steps);
  cfg.validate();
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return config_from_xml(s.str());
}

std::string config_to_xml(const EngineConfig& cfg) {
  const auto& f = cfg.fusion;
  xml::Tree doc;
  xml::Tree& n = doc.add_child("config", xml::Tree{});
  xml::set_attr(n, "gamma", f.gamma);
  xml::set_attr(n, "delta", f.match.delta);
  xml::set_attr(n, "seed", f.match.ransac.seed);
  xml::set_attr(n, "canny_low", f.layout.canny.low);
  xml::set_attr(n, "canny_high", f.layout.canny.high);
  xml::set_attr(n, "dilation", f.layout.dilation_radius);
  xml::set_attr(n, "dilation_reference_width", f.layout.dilation_reference_width);
  xml::set_attr(n, "group_gap", f.layout.group_gap);
  xml::set_attr(n, "line_overlap", f.layout.line_overlap);
  xml::set_attr(n, "text_similarity", f.layout.text_similarity);
  xml::set_attr(n, "max_steps", f.max_steps);
  return xml::to_string(doc);
}

}  // namespace visreplay
