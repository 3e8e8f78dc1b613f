#include "visreplay/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <png.h>

#include "visreplay/error.hpp"

namespace visreplay {

RasterImage::RasterImage(int width, int height, Rgba fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(fmt::format("invalid image size {}x{}", width, height));
  }
  rgba_.resize(static_cast<std::size_t>(width) * height * 4);
  for (std::size_t i = 0; i < rgba_.size(); i += 4) {
    rgba_[i] = fill.r;
    rgba_[i + 1] = fill.g;
    rgba_[i + 2] = fill.b;
    rgba_[i + 3] = fill.a;
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> rgba)
    : width_(width), height_(height), rgba_(std::move(rgba)) {
  if (width < 1 || height < 1 ||
      rgba_.size() != static_cast<std::size_t>(width) * height * 4) {
    throw Error(fmt::format("pixel buffer does not match {}x{} RGBA", width, height));
  }
}

std::uint64_t fingerprint(const RasterImage& img) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix(static_cast<std::uint8_t>(img.width() >> shift));
    mix(static_cast<std::uint8_t>(img.height() >> shift));
  }
  for (auto b : img.bytes()) mix(b);
  return h;
}

// ---------------------------------------------------------------------------
// PNG

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(fmt::format("malformed PNG stream: {}", image.message));
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("malformed PNG stream: " + msg);
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height),
                     std::move(pixels));
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGBA;

  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, img.bytes().data(), 0, nullptr)) {
    throw Error(fmt::format("PNG encode failed: {}", image.message));
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.bytes().data(), 0,
                                 nullptr)) {
    throw Error(fmt::format("PNG encode failed: {}", image.message));
  }
  out.resize(size);
  return out;
}

RasterImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

// ---------------------------------------------------------------------------
// Pixel operations

GrayImage to_grayscale(const RasterImage& img) {
  GrayImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgba c = img.at(x, y);
      // Integer form of round(0.299 R + 0.587 G + 0.114 B).
      const int v = (299 * c.r + 587 * c.g + 114 * c.b + 500) / 1000;
      out(y, x) = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> crop(const Plane<Scalar>& img, const PixelBox& box) {
  if (!box.within(resolution_of(img))) {
    throw Error(fmt::format("crop box ({},{})-({},{}) outside {}x{} image", box.x0,
                            box.y0, box.x1, box.y1, img.cols(), img.rows()));
  }
  return img.block(box.y0, box.x0, box.height(), box.width());
}

template Plane<std::uint8_t> crop(const Plane<std::uint8_t>&, const PixelBox&);
template Plane<bool> crop(const Plane<bool>&, const PixelBox&);
template Plane<float> crop(const Plane<float>&, const PixelBox&);

RasterImage crop(const RasterImage& img, const PixelBox& box) {
  if (!box.within(img.resolution())) {
    throw Error(fmt::format("crop box ({},{})-({},{}) outside {}x{} image", box.x0,
                            box.y0, box.x1, box.y1, img.width(), img.height()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(box.area()) * 4);
  const auto src = img.bytes();
  for (int y = box.y0; y <= box.y1; ++y) {
    const auto row = (static_cast<std::size_t>(y) * img.width() + box.x0) * 4;
    out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(row),
               src.begin() + static_cast<std::ptrdiff_t>(row + box.width() * 4));
  }
  return RasterImage(box.width(), box.height(), std::move(out));
}

// ---------------------------------------------------------------------------
// Canny

namespace {

Plane<float> gaussian_smooth(const GrayImage& img, double sigma, int ksize) {
  const int r = ksize / 2;
  std::vector<float> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2 * sigma * sigma));
    k[i + r] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);

  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const Plane<float> src = img.cast<float>();
  Plane<float> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src(y, std::clamp(x + i, 0, w - 1));
      tmp(y, x) = acc;
    }
  }
  Plane<float> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(std::clamp(y + i, 0, h - 1), x);
      out(y, x) = acc;
    }
  }
  return out;
}

struct Gradients {
  Plane<float> gx, gy, mag;
};

Gradients sobel(const Plane<float>& s) {
  const int h = static_cast<int>(s.rows());
  const int w = static_cast<int>(s.cols());
  Gradients g{Plane<float>(h, w), Plane<float>(h, w), Plane<float>(h, w)};
  auto at = [&](int y, int x) {
    return s(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const float gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                       (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      g.gx(y, x) = gx;
      g.gy(y, x) = gy;
      g.mag(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

Gradients smoothed_gradients(const GrayImage& img, const CannyOptions& opts) {
  return sobel(gaussian_smooth(img, opts.sigma, opts.kernel_size));
}

}  // namespace

Plane<float> gradient_magnitude(const GrayImage& img, const CannyOptions& opts) {
  return smoothed_gradients(img, opts).mag;
}

EdgeMap canny(const GrayImage& img, const CannyOptions& opts) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  EdgeMap edges = EdgeMap::Constant(h, w, false);
  if (h < 3 || w < 3) return edges;

  const Gradients g = smoothed_gradients(img, opts);
  const auto low = static_cast<float>(opts.low);
  const auto high = static_cast<float>(opts.high);

  // 0 = suppressed, 1 = weak, 2 = strong
  Plane<std::uint8_t> cls = Plane<std::uint8_t>::Zero(h, w);
  // tan(22.5deg) and tan(67.5deg)
  constexpr float kTan22 = 0.41421356f;
  constexpr float kTan67 = 2.41421356f;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const float m = g.mag(y, x);
      if (m <= low) continue;
      const float ax = std::abs(g.gx(y, x));
      const float ay = std::abs(g.gy(y, x));
      float a = 0, b = 0;
      if (ay <= kTan22 * ax) {
        a = g.mag(y, x - 1);
        b = g.mag(y, x + 1);
      } else if (ay >= kTan67 * ax) {
        a = g.mag(y - 1, x);
        b = g.mag(y + 1, x);
      } else if ((g.gx(y, x) > 0) == (g.gy(y, x) > 0)) {
        a = g.mag(y - 1, x - 1);
        b = g.mag(y + 1, x + 1);
      } else {
        a = g.mag(y - 1, x + 1);
        b = g.mag(y + 1, x - 1);
      }
      // Asymmetric comparison keeps exactly one of two equal ridge pixels.
      if (m > a && m >= b) cls(y, x) = m > high ? 2 : 1;
    }
  }

  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (cls(y, x) == 2) {
        edges(y, x) = true;
        stack.emplace_back(y, x);
      }
    }
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy;
        const int nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
        if (cls(ny, nx) == 1 && !edges(ny, nx)) {
          edges(ny, nx) = true;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return edges;
}

EdgeMap dilate(const EdgeMap& edges, int radius) {
  if (radius < 0) throw Error("dilation radius must be non-negative");
  if (radius == 0) return edges;
  const int h = static_cast<int>(edges.rows());
  const int w = static_cast<int>(edges.cols());
  EdgeMap horiz = EdgeMap::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    int last = -1 - radius;  // column of the most recent set pixel
    for (int x = 0; x < w + radius; ++x) {
      if (x < w && edges(y, x)) last = x;
      const int out = x - radius;
      if (out >= 0 && out < w) {
        // any set pixel in [out - radius, out + radius]
        horiz(y, out) = last >= out - radius;
      }
    }
  }
  EdgeMap out = EdgeMap::Constant(h, w, false);
  for (int x = 0; x < w; ++x) {
    int last = -1 - radius;
    for (int y = 0; y < h + radius; ++y) {
      if (y < h && horiz(y, x)) last = y;
      const int o = y - radius;
      if (o >= 0 && o < h) out(o, x) = last >= o - radius;
    }
  }
  return out;
}

std::vector<Contour> find_contours(const EdgeMap& edges) {
  const int h = static_cast<int>(edges.rows());
  const int w = static_cast<int>(edges.cols());
  std::vector<Contour> contours;
  Plane<bool> seen = Plane<bool>::Constant(h, w, false);
  std::vector<std::pair<int, int>> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!edges(y, x) || seen(y, x)) continue;
      PixelBox box{x, y, x, y};
      seen(y, x) = true;
      stack.emplace_back(y, x);
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        box.x0 = std::min(box.x0, cx);
        box.x1 = std::max(box.x1, cx);
        box.y0 = std::min(box.y0, cy);
        box.y1 = std::max(box.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy;
            const int nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
            if (edges(ny, nx) && !seen(ny, nx)) {
              seen(ny, nx) = true;
              stack.emplace_back(ny, nx);
            }
          }
        }
      }
      contours.push_back({box, std::nullopt});
    }
  }

  // Parent = smallest containing box; identical boxes nest under the earlier
  // one so the relation stays a forest.
  for (std::size_t i = 0; i < contours.size(); ++i) {
    const PixelBox& child = contours[i].box;
    for (std::size_t j = 0; j < contours.size(); ++j) {
      if (j == i) continue;
      const PixelBox& cand = contours[j].box;
      if (!cand.contains(child)) continue;
      if (cand == child && j > i) continue;
      const auto& best = contours[i].parent;
      if (!best || cand.area() < contours[*best].box.area()) contours[i].parent = j;
    }
  }
  return contours;
}

}  // namespace visreplay
