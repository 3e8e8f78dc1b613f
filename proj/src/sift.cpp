#include "visreplay/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <tuple>

#include <Eigen/Dense>

namespace visreplay {

namespace {

using Image = Plane<float>;

constexpr int kBorder = 5;
constexpr int kMaxRefineSteps = 5;
constexpr int kOrientationBins = 36;
constexpr float kOrientationPeakRatio = 0.8f;
constexpr float kOrientationSigmaFactor = 1.5f;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr float kDescScaleFactor = 3.0f;
constexpr float kDescMagClamp = 0.2f;
constexpr float kTwoPi = 6.283185307179586f;

std::vector<float> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[i + r] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable blur with replicated borders.
Image blur(const Image& src, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());

  Image tmp(h, w);
  std::vector<float> line(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < h; ++y) {
    const float* row = src.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int i = 0; i < w + 2 * r; ++i) line[i] = row[std::clamp(i - r, 0, w - 1)];
    float* out = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      const float* l = line.data() + x;
      for (int t = 0; t <= 2 * r; ++t) acc += k[t] * l[t];
      out[x] = acc;
    }
  }

  Image dst(h, w);
  std::vector<float> acc(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    for (int t = -r; t <= r; ++t) {
      const float kt = k[t + r];
      const float* row = tmp.data() + static_cast<std::ptrdiff_t>(std::clamp(y + t, 0, h - 1)) * w;
      for (int x = 0; x < w; ++x) acc[x] += kt * row[x];
    }
    std::copy(acc.begin(), acc.end(), dst.data() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return dst;
}

Image downsample(const Image& src) {
  const int h = std::max<int>(1, static_cast<int>(src.rows()) / 2);
  const int w = std::max<int>(1, static_cast<int>(src.cols()) / 2);
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(y, x) = src(2 * y, 2 * x);
  return out;
}

struct Octave {
  std::vector<Image> gauss;
  std::vector<Image> dog;
};

class Detector {
 public:
  Detector(const GrayImage& img, const SiftOptions& opts) : opts_(opts) {
    const int s = opts.scales_per_octave;
    const int min_side = static_cast<int>(std::min(img.rows(), img.cols()));
    const int octaves = std::clamp(
        static_cast<int>(std::floor(std::log2(static_cast<double>(min_side)))) - 3, 1,
        opts.max_octaves);

    // Incremental blur between consecutive layers of an octave.
    std::vector<double> sig(static_cast<std::size_t>(s + 3));
    const double k = std::pow(2.0, 1.0 / s);
    sig[0] = opts.base_sigma;
    for (int i = 1; i < s + 3; ++i) {
      const double prev = std::pow(k, i - 1) * opts.base_sigma;
      const double total = prev * k;
      sig[i] = std::sqrt(total * total - prev * prev);
    }

    Image base = img.cast<float>() / 255.0f;
    const double init = std::sqrt(std::max(
        0.01, opts.base_sigma * opts.base_sigma - opts.assumed_blur * opts.assumed_blur));
    base = blur(base, init);

    for (int o = 0; o < octaves; ++o) {
      Octave oct;
      oct.gauss.reserve(static_cast<std::size_t>(s + 3));
      oct.gauss.push_back(o == 0 ? base : downsample(octaves_.back().gauss[s]));
      for (int i = 1; i < s + 3; ++i) oct.gauss.push_back(blur(oct.gauss.back(), sig[i]));
      for (int i = 0; i < s + 2; ++i) oct.dog.push_back(oct.gauss[i + 1] - oct.gauss[i]);
      octaves_.push_back(std::move(oct));
      if (std::min(octaves_.back().gauss[0].rows(), octaves_.back().gauss[0].cols()) <
          2 * (kBorder + 2)) {
        break;
      }
    }
  }

  FeatureSet run() {
    std::vector<std::pair<Keypoint, std::array<float, kDescriptorSize>>> found;
    const int s = opts_.scales_per_octave;
    const float prelim = static_cast<float>(0.5 * opts_.contrast_threshold / s);

    for (int o = 0; o < static_cast<int>(octaves_.size()); ++o) {
      const Octave& oct = octaves_[o];
      const int h = static_cast<int>(oct.dog[0].rows());
      const int w = static_cast<int>(oct.dog[0].cols());
      for (int layer = 1; layer <= s; ++layer) {
        const Image& cur = oct.dog[layer];
        for (int y = kBorder; y < h - kBorder; ++y) {
          for (int x = kBorder; x < w - kBorder; ++x) {
            const float v = cur(y, x);
            if (std::abs(v) <= prelim) continue;
            if (!is_extremum(oct, layer, y, x, v)) continue;
            Keypoint kp;
            if (!refine(o, layer, y, x, kp)) continue;
            for (float angle : orientations(o, kp)) {
              kp.orientation = angle;
              std::array<float, kDescriptorSize> desc{};
              if (describe(o, kp, desc)) found.emplace_back(kp, desc);
            }
          }
        }
      }
    }

    std::vector<std::size_t> order(found.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Keypoint& ka = found[a].first;
      const Keypoint& kb = found[b].first;
      return std::tie(ka.y, ka.x, ka.scale, ka.orientation, a) <
             std::tie(kb.y, kb.x, kb.scale, kb.orientation, b);
    });

    FeatureSet fs;
    fs.keypoints.reserve(found.size());
    fs.descriptors.resize(static_cast<Eigen::Index>(found.size()), kDescriptorSize);
    for (std::size_t i = 0; i < order.size(); ++i) {
      fs.keypoints.push_back(found[order[i]].first);
      fs.descriptors.row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::Matrix<float, 1, kDescriptorSize>>(found[order[i]].second.data());
    }
    return fs;
  }

 private:
  static bool is_extremum(const Octave& oct, int layer, int y, int x, float v) {
    const bool is_max = v > 0;
    for (int l = layer - 1; l <= layer + 1; ++l) {
      const Image& d = oct.dog[l];
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (l == layer && dy == 0 && dx == 0) continue;
          const float n = d(y + dy, x + dx);
          if (is_max ? n > v : n < v) return false;
        }
      }
    }
    return true;
  }

  // Quadratic fit of the DoG around a discrete extremum.
  bool refine(int o, int layer, int y, int x, Keypoint& kp) const {
    const Octave& oct = octaves_[o];
    const int s = opts_.scales_per_octave;
    const int h = static_cast<int>(oct.dog[0].rows());
    const int w = static_cast<int>(oct.dog[0].cols());
    Eigen::Vector3f offset = Eigen::Vector3f::Zero();
    Eigen::Vector3f grad = Eigen::Vector3f::Zero();
    bool converged = false;

    for (int step = 0; step < kMaxRefineSteps; ++step) {
      const Image& prev = oct.dog[layer - 1];
      const Image& cur = oct.dog[layer];
      const Image& next = oct.dog[layer + 1];
      const float c = cur(y, x);
      grad << 0.5f * (cur(y, x + 1) - cur(y, x - 1)), 0.5f * (cur(y + 1, x) - cur(y - 1, x)),
          0.5f * (next(y, x) - prev(y, x));
      const float dxx = cur(y, x + 1) + cur(y, x - 1) - 2 * c;
      const float dyy = cur(y + 1, x) + cur(y - 1, x) - 2 * c;
      const float dss = next(y, x) + prev(y, x) - 2 * c;
      const float dxy =
          0.25f * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
      const float dxs =
          0.25f * (next(y, x + 1) - next(y, x - 1) - prev(y, x + 1) + prev(y, x - 1));
      const float dys =
          0.25f * (next(y + 1, x) - next(y - 1, x) - prev(y + 1, x) + prev(y - 1, x));
      Eigen::Matrix3f hess;
      hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
      offset = -hess.fullPivLu().solve(grad);
      if (!offset.allFinite()) return false;
      if (offset.cwiseAbs().maxCoeff() < 0.5f) {
        converged = true;
        break;
      }
      if (offset.cwiseAbs().maxCoeff() > 1e6f) return false;
      x += static_cast<int>(std::lround(offset.x()));
      y += static_cast<int>(std::lround(offset.y()));
      layer += static_cast<int>(std::lround(offset.z()));
      if (layer < 1 || layer > s || x < kBorder || x >= w - kBorder || y < kBorder ||
          y >= h - kBorder) {
        return false;
      }
    }
    if (!converged) return false;

    const Image& cur = oct.dog[layer];
    const float contrast = cur(y, x) + 0.5f * grad.dot(offset);
    if (std::abs(contrast) * s < opts_.contrast_threshold) return false;

    const float c = cur(y, x);
    const float dxx = cur(y, x + 1) + cur(y, x - 1) - 2 * c;
    const float dyy = cur(y + 1, x) + cur(y - 1, x) - 2 * c;
    const float dxy =
        0.25f * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
    const float tr = dxx + dyy;
    const float det = dxx * dyy - dxy * dxy;
    const auto r = static_cast<float>(opts_.edge_ratio);
    if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;

    const float unit = std::ldexp(1.0f, o);
    kp.x = (static_cast<float>(x) + offset.x()) * unit;
    kp.y = (static_cast<float>(y) + offset.y()) * unit;
    kp.octave = o;
    kp.layer = layer;
    kp.scale = static_cast<float>(opts_.base_sigma) *
               std::pow(2.0f, (static_cast<float>(layer) + offset.z()) / s) * unit;
    kp.response = std::abs(contrast);
    return true;
  }

  float octave_sigma(const Keypoint& kp) const {
    return kp.scale / std::ldexp(1.0f, kp.octave);
  }

  std::vector<float> orientations(int o, const Keypoint& kp) const {
    const Image& img = octaves_[o].gauss[kp.layer];
    const int h = static_cast<int>(img.rows());
    const int w = static_cast<int>(img.cols());
    const float unit = std::ldexp(1.0f, o);
    const int cx = static_cast<int>(std::lround(kp.x / unit));
    const int cy = static_cast<int>(std::lround(kp.y / unit));
    const float sigma = kOrientationSigmaFactor * octave_sigma(kp);
    const int radius = static_cast<int>(std::lround(3 * sigma));
    const float denom = -1.0f / (2 * sigma * sigma);

    std::array<float, kOrientationBins> hist{};
    for (int i = -radius; i <= radius; ++i) {
      const int y = cy + i;
      if (y <= 0 || y >= h - 1) continue;
      for (int j = -radius; j <= radius; ++j) {
        const int x = cx + j;
        if (x <= 0 || x >= w - 1) continue;
        const float dx = img(y, x + 1) - img(y, x - 1);
        const float dy = img(y + 1, x) - img(y - 1, x);
        const float mag = std::sqrt(dx * dx + dy * dy);
        float angle = std::atan2(dy, dx);
        if (angle < 0) angle += kTwoPi;
        int bin = static_cast<int>(std::lround(angle * kOrientationBins / kTwoPi));
        bin = ((bin % kOrientationBins) + kOrientationBins) % kOrientationBins;
        hist[bin] += std::exp((i * i + j * j) * denom) * mag;
      }
    }

    std::array<float, kOrientationBins> smooth{};
    for (int b = 0; b < kOrientationBins; ++b) {
      auto at = [&](int k) { return hist[(b + k + kOrientationBins) % kOrientationBins]; };
      smooth[b] = (at(-2) + at(2)) * (1.0f / 16) + (at(-1) + at(1)) * (4.0f / 16) +
                  at(0) * (6.0f / 16);
    }
    const float peak = *std::max_element(smooth.begin(), smooth.end());
    std::vector<float> out;
    if (peak <= 0) return out;
    for (int b = 0; b < kOrientationBins; ++b) {
      const float l = smooth[(b + kOrientationBins - 1) % kOrientationBins];
      const float r = smooth[(b + 1) % kOrientationBins];
      const float c = smooth[b];
      if (c > l && c > r && c >= kOrientationPeakRatio * peak) {
        float bin = static_cast<float>(b) + 0.5f * (l - r) / (l - 2 * c + r);
        if (bin < 0) bin += kOrientationBins;
        if (bin >= kOrientationBins) bin -= kOrientationBins;
        out.push_back(bin * kTwoPi / kOrientationBins);
      }
    }
    return out;
  }

  bool describe(int o, const Keypoint& kp, std::array<float, kDescriptorSize>& out) const {
    const Image& img = octaves_[o].gauss[kp.layer];
    const int h = static_cast<int>(img.rows());
    const int w = static_cast<int>(img.cols());
    const float unit = std::ldexp(1.0f, o);
    const float fx = kp.x / unit;
    const float fy = kp.y / unit;
    const int cx = static_cast<int>(std::lround(fx));
    const int cy = static_cast<int>(std::lround(fy));

    const float hist_width = kDescScaleFactor * octave_sigma(kp);
    int radius = static_cast<int>(
        std::lround(hist_width * std::sqrt(2.0f) * (kDescWidth + 1) * 0.5f));
    radius = std::min(radius, static_cast<int>(std::sqrt(float(w * w + h * h))));
    const float cos_t = std::cos(kp.orientation) / hist_width;
    const float sin_t = std::sin(kp.orientation) / hist_width;
    const float exp_scale = -1.0f / (kDescWidth * kDescWidth * 0.5f);
    const float bins_per_rad = kDescBins / kTwoPi;

    constexpr int kSide = kDescWidth + 2;
    std::array<float, kSide * kSide * (kDescBins + 2)> hist{};
    auto cell = [&](int r, int c, int b) -> float& {
      return hist[(static_cast<std::size_t>(r) * kSide + c) * (kDescBins + 2) + b];
    };

    for (int i = -radius; i <= radius; ++i) {
      const int y = cy + i;
      if (y <= 0 || y >= h - 1) continue;
      for (int j = -radius; j <= radius; ++j) {
        const int x = cx + j;
        if (x <= 0 || x >= w - 1) continue;
        // Sample position in the keypoint frame (x-axis along the orientation).
        const float u = j * cos_t + i * sin_t;
        const float v = -j * sin_t + i * cos_t;
        const float rbin = v + kDescWidth / 2.0f - 0.5f;
        const float cbin = u + kDescWidth / 2.0f - 0.5f;
        if (rbin <= -1 || rbin >= kDescWidth || cbin <= -1 || cbin >= kDescWidth) continue;

        const float dx = img(y, x + 1) - img(y, x - 1);
        const float dy = img(y + 1, x) - img(y - 1, x);
        const float mag = std::sqrt(dx * dx + dy * dy) * std::exp((u * u + v * v) * exp_scale);
        float angle = std::atan2(dy, dx) - kp.orientation;
        while (angle < 0) angle += kTwoPi;
        while (angle >= kTwoPi) angle -= kTwoPi;
        const float obin = angle * bins_per_rad;

        const int r0 = static_cast<int>(std::floor(rbin));
        const int c0 = static_cast<int>(std::floor(cbin));
        int o0 = static_cast<int>(std::floor(obin));
        const float dr = rbin - r0;
        const float dc = cbin - c0;
        const float dob = obin - o0;
        if (o0 >= kDescBins) o0 -= kDescBins;

        // Trilinear distribution into the padded histogram.
        for (int a = 0; a <= 1; ++a) {
          const float wr = a ? dr : 1 - dr;
          for (int b = 0; b <= 1; ++b) {
            const float wc = b ? dc : 1 - dc;
            for (int c = 0; c <= 1; ++c) {
              const float wo = c ? dob : 1 - dob;
              cell(r0 + 1 + a, c0 + 1 + b, o0 + c) += mag * wr * wc * wo;
            }
          }
        }
      }
    }

    for (int r = 0; r < kDescWidth; ++r) {
      for (int c = 0; c < kDescWidth; ++c) {
        // Fold the wrapped orientation bin back.
        cell(r + 1, c + 1, 0) += cell(r + 1, c + 1, kDescBins);
        for (int b = 0; b < kDescBins; ++b) {
          out[(static_cast<std::size_t>(r) * kDescWidth + c) * kDescBins + b] = cell(r + 1, c + 1, b);
        }
      }
    }

    Eigen::Map<Eigen::Matrix<float, kDescriptorSize, 1>> d(out.data());
    const float norm = d.norm();
    if (!(norm > 0)) return false;
    d = d.cwiseMin(kDescMagClamp * norm);
    const float renorm = d.norm();
    if (!(renorm > 0)) return false;
    d /= renorm;
    return true;
  }

  SiftOptions opts_;
  std::vector<Octave> octaves_;
};

}  // namespace

FeatureSet extract_features(const GrayImage& img, const SiftOptions& opts) {
  if (img.rows() < opts.min_image_size || img.cols() < opts.min_image_size) {
    FeatureSet empty;
    empty.descriptors.resize(0, kDescriptorSize);
    return empty;
  }
  return Detector(img, opts).run();
}

}  // namespace visreplay
