#pragma once

#include <vector>

#include "endotrack/exec.hpp"
#include "endotrack/geom.hpp"
#include "endotrack/tiplocate/image.hpp"

namespace endotrack::tiplocate {

struct StereoConfig {
  int window = 64;          ///< square template side (px)
  int max_disparity = 128;  ///< search d in [0, max_disparity]
  double min_ncc = 0.7;     ///< peak NCC below this is rejected
  double min_overlap = 0.5; ///< fraction of the window that must fall inside both images
};

struct StereoMatch {
  double disparity = 0.0;  ///< left x minus right x (px), sub-pixel
  double score = 0.0;      ///< peak NCC
};

/// NCC score of the left template around `tip` against the right image shifted by `d`.
/// Pixels outside either image are excluded from the statistics. Returns
/// -infinity when too few pixels overlap, 0 for a textureless window.
double ncc_at(const GrayImage& left, const GrayImage& right, int cx, int cy, int d, const StereoConfig& cfg);

struct PixelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  ///< inclusive bounds
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// Pixels of either image that matching at `tip` can read.
PixelRect stereo_support(const Vec2& tip, const StereoConfig& cfg);

/// Scores for every d in [0, max_disparity].
std::vector<double> ncc_profile(const GrayImage& left, const GrayImage& right, const Vec2& tip,
                                const StereoConfig& cfg, Exec exec = Exec::Parallel);

/// Best match along the same row, searched in one direction (the right view
/// sees the point further left). Throws LowConfidence below `min_ncc`.
StereoMatch stereo_match(const GrayImage& left, const GrayImage& right, const Vec2& tip,
                         const StereoConfig& cfg = {}, Exec exec = Exec::Parallel);

}  // namespace endotrack::tiplocate
