#pragma once

// Small helpers over boost::property_tree for the attribute-heavy XML files
// this project reads and writes.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "visreplay/error.hpp"

namespace visreplay::xml {

using Tree = boost::property_tree::ptree;

inline Tree read_file(const std::filesystem::path& path) {
  Tree t;
  try {
    boost::property_tree::read_xml(path.string(), t,
                                   boost::property_tree::xml_parser::trim_whitespace);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(fmt::format("malformed XML in {}: {}", path.string(), e.message()));
  }
  return t;
}

inline Tree read_string(const std::string& text) {
  Tree t;
  std::istringstream in(text);
  try {
    boost::property_tree::read_xml(in, t, boost::property_tree::xml_parser::trim_whitespace);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(fmt::format("malformed XML: {}", e.message()));
  }
  return t;
}

inline std::string to_string(const Tree& t) {
  std::ostringstream out;
  boost::property_tree::write_xml(out, t,
                                  boost::property_tree::xml_writer_make_settings<std::string>(' ', 2));
  return out.str();
}

inline void write_file(const Tree& t, const std::filesystem::path& path) {
  try {
    boost::property_tree::write_xml(
        path.string(), t, std::locale(),
        boost::property_tree::xml_writer_make_settings<std::string>(' ', 2));
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(fmt::format("cannot write {}: {}", path.string(), e.message()));
  }
}

inline const Tree& child(const Tree& t, const std::string& name, const std::string& where) {
  auto it = t.get_child_optional(name);
  if (!it) throw Error(fmt::format("{}: missing <{}>", where, name));
  return *it;
}

inline std::optional<std::string> maybe_attr(const Tree& node, const std::string& name) {
  if (auto v = node.get_optional<std::string>("<xmlattr>." + name)) return *v;
  return std::nullopt;
}

inline std::string attr(const Tree& node, const std::string& name, const std::string& where) {
  auto v = maybe_attr(node, name);
  if (!v) throw Error(fmt::format("{}: missing attribute '{}'", where, name));
  return *v;
}

template <typename T>
T attr_as(const Tree& node, const std::string& name, const std::string& where) {
  const std::string raw = attr(node, name, where);
  std::istringstream in(raw);
  in.imbue(std::locale::classic());
  T v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw Error(fmt::format("{}: attribute '{}' has invalid value '{}'", where, name, raw));
  }
  return v;
}

inline void set_attr(Tree& node, const std::string& name, const std::string& value) {
  node.put("<xmlattr>." + name, value);
}

template <typename T>
void set_attr(Tree& node, const std::string& name, const T& value) {
  node.put("<xmlattr>." + name, fmt::format("{}", value));
}

}  // namespace visreplay::xml
