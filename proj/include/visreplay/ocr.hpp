#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"

namespace visreplay {

struct TextRegion {
  PixelBox box;
  std::string text;
  double confidence = 1.0;

  friend bool operator==(const TextRegion&, const TextRegion&) = default;
};

/// Text recognizer plugged into layout matching. Implementations must be
/// safe to call concurrently.
class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual std::vector<TextRegion> extract(const RasterImage& img) const = 0;
};

/// Reads `<ocr><region x0 y0 x1 y1 conf>text</region>...</ocr>`. Regions
/// must lie inside `bounds` and carry non-empty text.
std::vector<TextRegion> load_ocr_sidecar(const std::filesystem::path& path, Resolution bounds);
std::string ocr_sidecar_xml(std::span<const TextRegion> regions);

/// Fixture-backed engine: returns the regions registered for an image with
/// identical pixels, nothing otherwise.
class SidecarOcr : public OcrEngine {
 public:
  void add(const RasterImage& img, std::vector<TextRegion> regions);
  std::vector<TextRegion> extract(const RasterImage& img) const override;
  bool empty() const { return by_image_.empty(); }

 private:
  std::map<std::uint64_t, std::vector<TextRegion>> by_image_;
};

/// Texts whose region centers fall inside `box`, in reading order, joined by
/// single spaces.
std::string text_within(std::span<const TextRegion> regions, const PixelBox& box);

/// 1 - Levenshtein(a, b) / max(|a|, |b|) after lower-casing and collapsing
/// whitespace; two empty strings score 1.
double text_similarity(std::string_view a, std::string_view b);

}  // namespace visreplay
