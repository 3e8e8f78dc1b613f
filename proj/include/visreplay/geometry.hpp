#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace visreplay {

struct Resolution {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Inclusive pixel rectangle, origin at the image's top-left corner.
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(width()) * height();
  }
  Eigen::Vector2d center() const {
    return {(x0 + x1) / 2.0, (y0 + y1) / 2.0};
  }
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  bool contains(const PixelBox& o) const {
    return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1;
  }
  bool well_formed() const { return x0 >= 0 && y0 >= 0 && x0 <= x1 && y0 <= y1; }
  bool within(Resolution r) const {
    return well_formed() && x1 < r.width && y1 < r.height;
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

inline PixelBox bounding_union(const PixelBox& a, const PixelBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

inline std::int64_t intersection_area(const PixelBox& a, const PixelBox& b) {
  const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0) + 1;
  const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0) + 1;
  return (w > 0 && h > 0) ? static_cast<std::int64_t>(w) * h : 0;
}

inline double iou(const PixelBox& a, const PixelBox& b) {
  const auto inter = static_cast<double>(intersection_area(a, b));
  return inter / (static_cast<double>(a.area() + b.area()) - inter);
}

/// Point as fractions of screen width and height.
struct RelPoint {
  double x = 0.0;
  double y = 0.0;

  bool in_unit_square() const { return x >= 0 && x <= 1 && y >= 0 && y <= 1; }
  friend bool operator==(const RelPoint&, const RelPoint&) = default;
};

inline RelPoint operator+(RelPoint a, RelPoint b) { return {a.x + b.x, a.y + b.y}; }
inline RelPoint operator-(RelPoint a, RelPoint b) { return {a.x - b.x, a.y - b.y}; }
inline RelPoint operator*(double s, RelPoint p) { return {s * p.x, s * p.y}; }

inline double distance(RelPoint a, RelPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct RelBox {
  RelPoint top_left;
  RelPoint bottom_right;

  double width() const { return bottom_right.x - top_left.x; }
  double height() const { return bottom_right.y - top_left.y; }
  RelPoint center() const {
    return {(top_left.x + bottom_right.x) / 2.0, (top_left.y + bottom_right.y) / 2.0};
  }
  bool ordered() const {
    return top_left.x <= bottom_right.x && top_left.y <= bottom_right.y;
  }
  bool contains(RelPoint p) const {
    return p.x >= top_left.x && p.x <= bottom_right.x && p.y >= top_left.y &&
           p.y <= bottom_right.y;
  }

  /// Position of `p` in box-local fractions; a degenerate axis maps to 0.5.
  RelPoint local_fraction(RelPoint p) const {
    const double w = width();
    const double h = height();
    return {w > 0 ? (p.x - top_left.x) / w : 0.5, h > 0 ? (p.y - top_left.y) / h : 0.5};
  }
  RelPoint at_fraction(RelPoint f) const {
    return {top_left.x + f.x * width(), top_left.y + f.y * height()};
  }

  friend bool operator==(const RelBox&, const RelBox&) = default;
};

/// The whole-screen box used by steps that carry no widget.
inline constexpr RelBox kFullScreen{{0.0, 0.0}, {1.0, 1.0}};

inline RelPoint to_relative(double px, double py, Resolution r) {
  return {px / r.width, py / r.height};
}

inline RelBox to_relative(const PixelBox& b, Resolution r) {
  return {to_relative(b.x0, b.y0, r), to_relative(b.x1, b.y1, r)};
}

/// Nearest pixel for a relative point, clamped into the screen.
inline Eigen::Vector2i to_pixel(RelPoint p, Resolution r) {
  const long x = std::lround(p.x * r.width);
  const long y = std::lround(p.y * r.height);
  return {static_cast<int>(std::clamp<long>(x, 0, r.width - 1)),
          static_cast<int>(std::clamp<long>(y, 0, r.height - 1))};
}

inline PixelBox to_pixels(const RelBox& b, Resolution r) {
  const auto tl = to_pixel(b.top_left, r);
  const auto br = to_pixel(b.bottom_right, r);
  return {tl.x(), tl.y(), br.x(), br.y()};
}

}  // namespace visreplay
