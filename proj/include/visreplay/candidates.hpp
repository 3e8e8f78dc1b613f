#pragma once

#include <string>
#include <vector>

#include "visreplay/features.hpp"
#include "visreplay/geometry.hpp"
#include "visreplay/homography.hpp"
#include "visreplay/imaging.hpp"

namespace visreplay {

/// One suspected location of the recorded widget on the replay screen.
struct CandidateBox {
  PixelBox box;
  double score = 0;          // in [0, 1]
  std::size_t support = 0;   // matches explaining the box
  bool from_homography = false;

  friend bool operator==(const CandidateBox&, const CandidateBox&) = default;
};

struct MatchConfig {
  double delta = 0.5;
  SiftOptions sift;
  RansacOptions ransac;
  std::size_t min_matches = 4;
  /// A model needs support beyond its minimal sample to count as verified.
  std::size_t min_inliers = 5;
  /// Clusters too small for a homography still give a box when this many
  /// distinct matches agree on the widget center.
  std::size_t min_votes = 3;
  /// Most copies of one widget a single keypoint may vote for; 1 disables
  /// repeated-widget recovery.
  std::size_t max_repeats = 8;
  /// Accepted projected-area range relative to the widget crop.
  double max_area_ratio = 16.0;
};

/// Widget localization from precomputed features. Candidates are sorted by
/// score, highest first; an empty result means no cluster gathered enough
/// ratio-test survivors.
std::vector<CandidateBox> locate_candidates(const FeatureSet& widget, Resolution widget_size,
                                            const FeatureSet& screen, Resolution screen_size,
                                            const MatchConfig& cfg = {});

std::vector<CandidateBox> locate_candidates(const GrayImage& widget, const GrayImage& screen,
                                            const MatchConfig& cfg = {});

std::string candidates_to_xml(const std::vector<CandidateBox>& candidates,
                              Resolution widget_size, Resolution screen_size);

}  // namespace visreplay
