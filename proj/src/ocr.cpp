#include "visreplay/ocr.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <fmt/format.h>

#include "visreplay/error.hpp"
#include "xml_io.hpp"

namespace visreplay {

std::vector<TextRegion> load_ocr_sidecar(const std::filesystem::path& path, Resolution bounds) {
  const std::string where = path.string();
  const xml::Tree doc = xml::read_file(path);
  const xml::Tree& root = xml::child(doc, "ocr", where);
  std::vector<TextRegion> out;
  for (const auto& [name, node] : root) {
    if (name != "region") continue;
    TextRegion r;
    r.box = {xml::attr_as<int>(node, "x0", where), xml::attr_as<int>(node, "y0", where),
             xml::attr_as<int>(node, "x1", where), xml::attr_as<int>(node, "y1", where)};
    r.confidence = xml::maybe_attr(node, "conf") ? xml::attr_as<double>(node, "conf", where) : 1.0;
    r.text = node.get_value<std::string>();
    if (!r.box.within(bounds)) {
      throw Error(fmt::format("{}: region ({},{})-({},{}) outside {}x{} image", where, r.box.x0,
                              r.box.y0, r.box.x1, r.box.y1, bounds.width, bounds.height));
    }
    if (r.text.empty()) throw Error(fmt::format("{}: region with empty text", where));
    if (r.confidence < 0 || r.confidence > 1) {
      throw Error(fmt::format("{}: confidence {} outside [0,1]", where, r.confidence));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string ocr_sidecar_xml(std::span<const TextRegion> regions) {
  xml::Tree doc;
  xml::Tree& root = doc.add_child("ocr", xml::Tree{});
  for (const auto& r : regions) {
    xml::Tree& n = root.add_child("region", xml::Tree(r.text));
    xml::set_attr(n, "x0", r.box.x0);
    xml::set_attr(n, "y0", r.box.y0);
    xml::set_attr(n, "x1", r.box.x1);
    xml::set_attr(n, "y1", r.box.y1);
    xml::set_attr(n, "conf", fmt::format("{:.3f}", r.confidence));
  }
  return xml::to_string(doc);
}

void SidecarOcr::add(const RasterImage& img, std::vector<TextRegion> regions) {
  for (const auto& r : regions) {
    if (!r.box.within(img.resolution())) throw Error("OCR region outside image bounds");
  }
  by_image_[fingerprint(img)] = std::move(regions);
}

std::vector<TextRegion> SidecarOcr::extract(const RasterImage& img) const {
  auto it = by_image_.find(fingerprint(img));
  return it == by_image_.end() ? std::vector<TextRegion>{} : it->second;
}

std::string text_within(std::span<const TextRegion> regions, const PixelBox& box) {
  std::vector<const TextRegion*> inside;
  for (const auto& r : regions) {
    const auto c = r.box.center();
    if (box.contains(c.x(), c.y())) inside.push_back(&r);
  }
  std::stable_sort(inside.begin(), inside.end(), [](const TextRegion* a, const TextRegion* b) {
    return std::tie(a->box.y0, a->box.x0) < std::tie(b->box.y0, b->box.x0);
  });
  std::string out;
  for (const auto* r : inside) {
    if (!out.empty()) out += ' ';
    out += r->text;
  }
  return out;
}

namespace {

std::string normalize_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

}  // namespace

double text_similarity(std::string_view a_raw, std::string_view b_raw) {
  const std::string a = normalize_text(a_raw);
  const std::string b = normalize_text(b_raw);
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

}  // namespace visreplay
