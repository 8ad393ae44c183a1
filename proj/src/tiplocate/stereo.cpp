#include "endotrack/tiplocate/stereo.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "endotrack/error.hpp"

namespace endotrack::tiplocate {

double ncc_at(const GrayImage& left, const GrayImage& right, int cx, int cy, int d, const StereoConfig& cfg) {
  const int half = cfg.window / 2;
  double sl = 0, sr = 0, sll = 0, srr = 0, slr = 0;
  int n = 0;
  for (int y = cy - half; y < cy - half + cfg.window; ++y) {
    if (y < 0 || y >= left.height || y >= right.height) continue;
    for (int x = cx - half; x < cx - half + cfg.window; ++x) {
      const int xr = x - d;
      if (x < 0 || x >= left.width || xr < 0 || xr >= right.width) continue;
      const double a = left.at(x, y), b = right.at(xr, y);
      sl += a;
      sr += b;
      sll += a * a;
      srr += b * b;
      slr += a * b;
      ++n;
    }
  }
  if (n < cfg.min_overlap * cfg.window * cfg.window) return -std::numeric_limits<double>::infinity();
  const double vl = sll - sl * sl / n, vr = srr - sr * sr / n;
  if (vl <= 1e-9 * n || vr <= 1e-9 * n) return 0.0;
  return (slr - sl * sr / n) / std::sqrt(vl * vr);
}

PixelRect stereo_support(const Vec2& tip, const StereoConfig& cfg) {
  const int cx = static_cast<int>(std::lround(tip.x())), cy = static_cast<int>(std::lround(tip.y()));
  const int half = cfg.window / 2;
  return {cx - half - cfg.max_disparity, cy - half, cx - half + cfg.window - 1, cy - half + cfg.window - 1};
}

std::vector<double> ncc_profile(const GrayImage& left, const GrayImage& right, const Vec2& tip,
                                const StereoConfig& cfg, Exec exec) {
  const int cx = static_cast<int>(std::lround(tip.x())), cy = static_cast<int>(std::lround(tip.y()));
  const int nd = cfg.max_disparity + 1;
  std::vector<double> scores(nd);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int d = 0; d < nd; ++d) scores[d] = ncc_at(left, right, cx, cy, d, cfg);
  } else {
    for (int d = 0; d < nd; ++d) scores[d] = ncc_at(left, right, cx, cy, d, cfg);
  }
  return scores;
}

StereoMatch stereo_match(const GrayImage& left, const GrayImage& right, const Vec2& tip, const StereoConfig& cfg,
                         Exec exec) {
  const auto scores = ncc_profile(left, right, tip, cfg, exec);
  int best = -1;
  for (int d = 0; d < static_cast<int>(scores.size()); ++d)
    if (std::isfinite(scores[d]) && (best < 0 || scores[d] > scores[best])) best = d;
  if (best < 0 || scores[best] < cfg.min_ncc) {
    std::ostringstream msg;
    msg << "peak NCC " << (best < 0 ? 0.0 : scores[best]) << " below " << cfg.min_ncc;
    throw Error(Errc::LowConfidence, msg.str());
  }
  StereoMatch m;
  m.score = scores[best];
  m.disparity = best;
  if (best > 0 && best + 1 < static_cast<int>(scores.size()) && std::isfinite(scores[best - 1]) &&
      std::isfinite(scores[best + 1])) {
    const double a = scores[best - 1], b = scores[best], c = scores[best + 1];
    const double denom = a - 2 * b + c;
    if (denom < 0) m.disparity += 0.5 * (a - c) / denom;
  }
  return m;
}

}  // namespace endotrack::tiplocate
