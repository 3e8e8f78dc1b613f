#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "visreplay/imaging.hpp"

namespace visreplay {

struct Keypoint {
  float x = 0;            // original-image pixels
  float y = 0;
  float scale = 0;        // Gaussian sigma in original-image pixels
  float orientation = 0;  // radians in [0, 2*pi), image axes (y down)
  float response = 0;     // |DoG| at the refined extremum
  int octave = 0;
  int layer = 0;
};

inline constexpr int kDescriptorSize = 128;

template <typename Scalar>
using DescriptorMatrixT =
    Eigen::Matrix<Scalar, Eigen::Dynamic, kDescriptorSize, Eigen::RowMajor>;
using DescriptorMatrix = DescriptorMatrixT<float>;

/// Keypoints plus one L2-normalized descriptor row per keypoint.
struct FeatureSet {
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;

  std::size_t size() const { return keypoints.size(); }
  bool empty() const { return keypoints.empty(); }
};

/// Difference-of-Gaussians detector with gradient-histogram descriptors
/// (4x4 spatial cells x 8 orientation bins). The first octave runs at the
/// native resolution so that identical pixel neighbourhoods produce
/// bit-identical descriptors.
struct SiftOptions {
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  double assumed_blur = 0.5;
  double contrast_threshold = 0.04;
  double edge_ratio = 10.0;
  int min_image_size = 16;
  int max_octaves = 8;
};

/// Images smaller than min_image_size on either side yield an empty set.
/// Keypoints are sorted by (y, x, scale, orientation).
FeatureSet extract_features(const GrayImage& img, const SiftOptions& opts = {});

}  // namespace visreplay
