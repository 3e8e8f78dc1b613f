#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "visreplay/geometry.hpp"

namespace visreplay {

/// Row-major 2D raster of one channel; indexed (row, col) == (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Plane<std::uint8_t>;
using EdgeMap = Plane<bool>;

template <typename Scalar>
Resolution resolution_of(const Plane<Scalar>& p) {
  return {static_cast<int>(p.cols()), static_cast<int>(p.rows())};
}

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// 8-bit RGBA raster, row-major, four samples per pixel.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgba fill = {255, 255, 255, 255});
  RasterImage(int width, int height, std::vector<std::uint8_t> rgba);

  int width() const { return width_; }
  int height() const { return height_; }
  Resolution resolution() const { return {width_, height_}; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgba at(int x, int y) const {
    const auto* p = &rgba_[offset(x, y)];
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba c) {
    auto* p = &rgba_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }

  std::span<const std::uint8_t> bytes() const { return rgba_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 4;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> rgba_;
};

/// 64-bit FNV-1a over dimensions and pixel bytes; used as a content key.
std::uint64_t fingerprint(const RasterImage& img);

RasterImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RasterImage& img);
RasterImage read_png(const std::filesystem::path& path);
void write_png(const RasterImage& img, const std::filesystem::path& path);

/// round(0.299 R + 0.587 G + 0.114 B); alpha ignored.
GrayImage to_grayscale(const RasterImage& img);

template <typename Scalar>
Plane<Scalar> crop(const Plane<Scalar>& img, const PixelBox& box);
RasterImage crop(const RasterImage& img, const PixelBox& box);

struct CannyOptions {
  double sigma = 1.4;
  int kernel_size = 5;
  double low = 50.0;
  double high = 150.0;
};

/// Sobel gradient magnitude of the Gaussian-smoothed image (L2 norm).
Plane<float> gradient_magnitude(const GrayImage& img, const CannyOptions& opts = {});

EdgeMap canny(const GrayImage& img, const CannyOptions& opts = {});

/// Square structuring element of side 2 * radius + 1.
EdgeMap dilate(const EdgeMap& edges, int radius);

struct Contour {
  PixelBox box;
  /// Index of the smallest other contour whose box contains this one.
  std::optional<std::size_t> parent;
};

/// Bounding boxes of 8-connected edge components, in raster order of the
/// component's first pixel.
std::vector<Contour> find_contours(const EdgeMap& edges);

}  // namespace visreplay
