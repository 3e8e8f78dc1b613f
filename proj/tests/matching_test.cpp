#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "visreplay/matching.hpp"

namespace visreplay {
namespace {

// All-pairs oracle: distances in double, ordered by (distance, index).
std::vector<MatchPair> brute_force(const DescriptorMatrix& target, const DescriptorMatrix& source) {
  std::vector<MatchPair> out;
  if (source.rows() < 2) return out;
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    std::vector<std::pair<double, std::size_t>> d;
    for (Eigen::Index s = 0; s < source.rows(); ++s) {
      double acc = 0;
      for (int k = 0; k < kDescriptorSize; ++k) {
        const double diff = static_cast<double>(target(t, k)) - static_cast<double>(source(s, k));
        acc += diff * diff;
      }
      d.emplace_back(std::sqrt(acc), static_cast<std::size_t>(s));
    }
    std::partial_sort(d.begin(), d.begin() + 2, d.end());
    out.push_back({static_cast<std::size_t>(t), d[0].second, d[1].second, d[0].first, d[1].first});
  }
  return out;
}

DescriptorMatrix unit_rows(std::initializer_list<int> axes) {
  DescriptorMatrix d = DescriptorMatrix::Zero(static_cast<Eigen::Index>(axes.size()), kDescriptorSize);
  Eigen::Index r = 0;
  for (int a : axes) d(r++, a) = 1.0f;
  return d;
}

TEST(Knn, IdenticalDescriptorHasZeroDistance) {
  synth::Rng rng(1);
  const DescriptorMatrix source = testing::random_descriptors(rng, 30);
  const DescriptorMatrix target = source.row(17);
  const auto m = knn_match(target, source);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].source_index, 17u);
  EXPECT_EQ(m[0].d_min, 0.0);
}

TEST(Knn, OrthonormalSources) {
  const DescriptorMatrix source = unit_rows({0, 1, 2});
  const DescriptorMatrix target = unit_rows({0});
  const auto m = knn_match(target, source);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].target_index, 0u);
  EXPECT_EQ(m[0].source_index, 0u);
  EXPECT_EQ(m[0].d_min, 0.0);
  EXPECT_DOUBLE_EQ(m[0].d_second_min, std::sqrt(2.0));
  // Rows 1 and 2 tie; the lower index wins.
  EXPECT_EQ(m[0].second_index, 1u);
}

TEST(Knn, FewerThanTwoSourcesIsEmpty) {
  synth::Rng rng(2);
  const DescriptorMatrix t = testing::random_descriptors(rng, 5);
  EXPECT_TRUE(knn_match(t, testing::random_descriptors(rng, 1)).empty());
  EXPECT_TRUE(knn_match(t, DescriptorMatrix(0, kDescriptorSize)).empty());
}

TEST(Knn, EqualsBruteForceOn500) {
  synth::Rng rng(3);
  const DescriptorMatrix t = testing::random_descriptors(rng, 500);
  const DescriptorMatrix s = testing::random_descriptors(rng, 500);
  EXPECT_EQ(knn_match(t, s), brute_force(t, s));
}

TEST(Knn, EqualsBruteForceWithDuplicatesAndLowDimensionalData) {
  synth::Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.index(300);
    DescriptorMatrix s = DescriptorMatrix::Zero(static_cast<Eigen::Index>(n), kDescriptorSize);
    // Few distinct values on few axes: many exact ties.
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (int k = 0; k < 3; ++k) s(i, k) = static_cast<float>(rng.index(3));
      if (s.row(i).norm() == 0) s(i, 5) = 1;
      s.row(i).normalize();
    }
    DescriptorMatrix t = s.topRows(std::min<Eigen::Index>(s.rows(), 40));
    EXPECT_EQ(knn_match(t, s), brute_force(t, s)) << "trial " << trial;
  }
}

TEST(KdTree, LeafSizesAgree) {
  synth::Rng rng(5);
  const DescriptorMatrix s = testing::random_descriptors(rng, 200);
  const DescriptorMatrix q = testing::random_descriptors(rng, 20);
  const KdTree a(s, 1);
  const KdTree b(s, 64);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const auto x = a.nearest_two(q.row(i).data());
    const auto y = b.nearest_two(q.row(i).data());
    EXPECT_EQ(x[0].index, y[0].index);
    EXPECT_EQ(x[1].index, y[1].index);
    EXPECT_EQ(x[0].distance, y[0].distance);
  }
}

TEST(RatioFilter, Examples) {
  const std::vector<MatchPair> pairs = {{0, 0, 1, 1.0, 4.0}, {1, 0, 1, 3.0, 4.0}};
  const auto kept = ratio_filter(pairs, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].target_index, 0u);
}

TEST(RatioFilter, ZeroSecondDistanceIsKept) {
  const std::vector<MatchPair> pairs = {{0, 3, 4, 0.0, 0.0}};
  EXPECT_EQ(ratio_filter(pairs, 0.5).size(), 1u);
}

TEST(RatioFilter, BoundaryIsStrict) {
  const std::vector<MatchPair> pairs = {{0, 0, 1, 2.0, 4.0}};
  EXPECT_TRUE(ratio_filter(pairs, 0.5).empty());
}

TEST(RatioFilter, SurvivorsSatisfyPredicateProperty) {
  synth::Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MatchPair> pairs;
    for (std::size_t i = 0; i < 100; ++i) {
      const double a = rng.uniform(0, 2);
      const double b = a + rng.uniform(0, 2);
      pairs.push_back({i, i, i + 1, a, b});
    }
    const double delta = rng.uniform(0.05, 0.999);
    for (const MatchPair& p : ratio_filter(pairs, delta)) {
      EXPECT_TRUE(p.d_second_min == 0 || p.d_min < delta * p.d_second_min);
    }
  }
}

}  // namespace
}  // namespace visreplay
