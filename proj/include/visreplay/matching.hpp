#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "visreplay/features.hpp"

namespace visreplay {

struct MatchPair {
  std::size_t target_index = 0;
  std::size_t source_index = 0;
  /// Second-nearest source descriptor; equal to source_index when the
  /// source holds a single descriptor.
  std::size_t second_index = 0;
  double d_min = 0;
  double d_second_min = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct Neighbor {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

/// Euclidean distance accumulated in double in component order; both the
/// tree search and its callers rank with this exact value.
double descriptor_distance(const float* a, const float* b);

/// Exact k-d tree over descriptor rows (split on the dimension of largest
/// spread at the median). Queries backtrack fully, so results equal a linear
/// scan; ties resolve to the lower index.
class KdTree {
 public:
  explicit KdTree(const DescriptorMatrix& points, int leaf_size = 8);

  std::array<Neighbor, 2> nearest_two(const float* query) const;
  /// Up to `k` nearest rows, closest first.
  std::vector<Neighbor> nearest(const float* query, std::size_t k) const;
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }

 private:
  struct Node {
    int dim = -1;  // -1 marks a leaf
    float split = 0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end, int leaf_size);
  void search(int node, const float* q, std::size_t k, std::vector<Neighbor>& best) const;

  const DescriptorMatrix& points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// For every target descriptor, the two nearest source descriptors. Returns
/// nothing when the source has fewer than two descriptors.
std::vector<MatchPair> knn_match(const FeatureSet& target, const FeatureSet& source);
std::vector<MatchPair> knn_match(const DescriptorMatrix& target, const DescriptorMatrix& source);

/// Keeps pairs with d_min / d_second_min < delta. A pair whose second
/// distance is zero is an exact repeat and is kept.
std::vector<MatchPair> ratio_filter(std::span<const MatchPair> pairs, double delta);

}  // namespace visreplay
