#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

#include "visreplay/device.hpp"
#include "visreplay/features.hpp"
#include "visreplay/geometry.hpp"
#include "visreplay/imaging.hpp"
#include "visreplay/script.hpp"
#include "visreplay/synth.hpp"

namespace visreplay::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("visreplay-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline RasterImage from_gray(const GrayImage& g) {
  RasterImage out(static_cast<int>(g.cols()), static_cast<int>(g.rows()));
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const auto v = g(y, x);
      out.set(x, y, {v, v, v, 255});
    }
  return out;
}

inline RasterImage random_image(synth::Rng& rng, int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = rng.next();
      img.set(x, y, {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                     static_cast<std::uint8_t>(v >> 16), 255});
    }
  return img;
}

/// Blocky random texture: distinctive enough for feature matching.
inline GrayImage blocky_texture(synth::Rng& rng, int w, int h, int block = 6) {
  GrayImage g(h, w);
  const int bw = (w + block - 1) / block;
  const int bh = (h + block - 1) / block;
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(bw * bh));
  for (auto& c : cells) c = static_cast<std::uint8_t>(rng.index(6) * 51);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g(y, x) = cells[static_cast<std::size_t>((y / block) * bw + x / block)];
  return g;
}

inline float bilinear(const GrayImage& src, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  auto at = [&](int xx, int yy) {
    xx = std::clamp(xx, 0, static_cast<int>(src.cols()) - 1);
    yy = std::clamp(yy, 0, static_cast<int>(src.rows()) - 1);
    return static_cast<double>(src(yy, xx));
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
                            fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1)));
}

/// Composites `widget` onto `screen` so that its center lands at `center`,
/// scaled by `scale` and rotated by `angle` radians. Returns nothing; the
/// pasted center is `center` by construction.
inline void paste(GrayImage& screen, const GrayImage& widget, Eigen::Vector2d center, double scale,
                  double angle) {
  const double wc = (static_cast<double>(widget.cols()) - 1) / 2;
  const double hc = (static_cast<double>(widget.rows()) - 1) / 2;
  const double c = std::cos(angle), s = std::sin(angle);
  const double reach = scale * std::hypot(wc + 1, hc + 1);
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x() - reach)));
  const int x1 = std::min(static_cast<int>(screen.cols()) - 1, static_cast<int>(std::ceil(center.x() + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y() - reach)));
  const int y1 = std::min(static_cast<int>(screen.rows()) - 1, static_cast<int>(std::ceil(center.y() + reach)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x(), dy = y - center.y();
      // Inverse rotation and scale into widget coordinates.
      const double u = (c * dx + s * dy) / scale + wc;
      const double v = (-s * dx + c * dy) / scale + hc;
      if (u < -0.5 || v < -0.5 || u > widget.cols() - 0.5 || v > widget.rows() - 0.5) continue;
      screen(y, x) = static_cast<std::uint8_t>(std::lround(bilinear(widget, u, v)));
    }
}

inline DescriptorMatrix random_descriptors(synth::Rng& rng, std::size_t n) {
  DescriptorMatrix d(static_cast<Eigen::Index>(n), kDescriptorSize);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (int j = 0; j < kDescriptorSize; ++j) d(i, j) = static_cast<float>(rng.uniform());
    d.row(i).normalize();
  }
  return d;
}

inline RasterImage solid(int w, int h, std::uint8_t v) { return RasterImage(w, h, Rgba{v, v, v, 255}); }

/// Two screens: "a" with a button leading to "b"; "b" with a button back to "a".
inline SimulatedSession two_screen_session(Resolution res = {200, 400}) {
  SimulatedSession s;
  s.serial = "SIM-T";
  s.initial = "a";
  Screen a{"a", solid(res.width, res.height, 240), {}, {}};
  a.regions.push_back({{20, 20, 99, 59}, "tap", "b", "go"});
  Screen b{"b", solid(res.width, res.height, 200), {}, {}};
  b.regions.push_back({{20, 300, 99, 339}, "tap", "a", "home"});
  s.screens = {a, b};
  return s;
}

inline DeviceMeta meta(Resolution r, std::string serial = "DEV-1") { return {std::move(serial), r}; }

}  // namespace visreplay::testing
