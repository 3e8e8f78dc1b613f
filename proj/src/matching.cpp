#include "visreplay/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace visreplay {

double descriptor_distance(const float* a, const float* b) {
  double sum = 0;
  for (int k = 0; k < kDescriptorSize; ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

namespace {

bool better(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

void offer(std::vector<Neighbor>& best, std::size_t k, Neighbor cand) {
  if (best.size() == k && !better(cand, best.back())) return;
  auto at = std::upper_bound(best.begin(), best.end(), cand, better);
  best.insert(at, cand);
  if (best.size() > k) best.pop_back();
}

}  // namespace

KdTree::KdTree(const DescriptorMatrix& points, int leaf_size) : points_(points) {
  order_.resize(static_cast<std::size_t>(points.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build(0, order_.size(), std::max(1, leaf_size));
}

int KdTree::build(std::size_t begin, std::size_t end, int leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= static_cast<std::size_t>(leaf_size)) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  int dim = 0;
  float spread = -1;
  for (int d = 0; d < kDescriptorSize; ++d) {
    float lo = points_(static_cast<Eigen::Index>(order_[begin]), d);
    float hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const float v = points_(static_cast<Eigen::Index>(order_[i]), d);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > spread) {
      spread = hi - lo;
      dim = d;
    }
  }
  if (spread <= 0) {  // all points identical
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  const std::size_t mid = begin + (end - begin) / 2;
  auto key = [&](std::size_t i) {
    return std::make_pair(points_(static_cast<Eigen::Index>(i), dim), i);
  };
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  const float split = points_(static_cast<Eigen::Index>(order_[mid]), dim);
  const int left = build(begin, mid, leaf_size);
  const int right = build(mid, end, leaf_size);
  nodes_[id].dim = dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node_id, const float* q, std::size_t k, std::vector<Neighbor>& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.dim < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      offer(best, k, {idx, descriptor_distance(q, points_.row(static_cast<Eigen::Index>(idx)).data())});
    }
    return;
  }
  const double diff = static_cast<double>(q[node.dim]) - static_cast<double>(node.split);
  const int near = diff <= 0 ? node.left : node.right;
  const int far = diff <= 0 ? node.right : node.left;
  search(near, q, k, best);
  // Points beyond the plane are at least |diff| away.
  if (best.size() < k || std::abs(diff) <= best.back().distance) search(far, q, k, best);
}

std::vector<Neighbor> KdTree::nearest(const float* query, std::size_t k) const {
  std::vector<Neighbor> best;
  if (k == 0 || nodes_.empty()) return best;
  best.reserve(k + 1);
  search(0, query, k, best);
  return best;
}

std::array<Neighbor, 2> KdTree::nearest_two(const float* query) const {
  std::array<Neighbor, 2> out{};
  const auto best = nearest(query, 2);
  for (std::size_t i = 0; i < best.size(); ++i) out[i] = best[i];
  return out;
}

std::vector<MatchPair> knn_match(const DescriptorMatrix& target, const DescriptorMatrix& source) {
  std::vector<MatchPair> out;
  if (source.rows() < 2) return out;
  const KdTree tree(source);
  out.reserve(static_cast<std::size_t>(target.rows()));
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    const auto nn = tree.nearest_two(target.row(i).data());
    out.push_back({static_cast<std::size_t>(i), nn[0].index, nn[1].index, nn[0].distance,
                   nn[1].distance});
  }
  return out;
}

std::vector<MatchPair> knn_match(const FeatureSet& target, const FeatureSet& source) {
  return knn_match(target.descriptors, source.descriptors);
}

std::vector<MatchPair> ratio_filter(std::span<const MatchPair> pairs, double delta) {
  std::vector<MatchPair> out;
  for (const MatchPair& p : pairs) {
    if (p.d_second_min == 0.0 || p.d_min / p.d_second_min < delta) out.push_back(p);
  }
  return out;
}

}  // namespace visreplay
