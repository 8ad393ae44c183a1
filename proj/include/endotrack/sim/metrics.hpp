#pragma once

#include <array>
#include <string>
#include <vector>

#include "endotrack/sim/loop.hpp"

namespace endotrack::sim {

struct Episode {
  double t_c = 0.0;  ///< entry into zone C
  double t_a = 0.0;  ///< next entry into zone A
  double duration() const { return t_a - t_c; }
};

struct MetricsReport {
  std::vector<Episode> image, depth;  ///< per-domain C-entry to A-entry
  std::vector<Episode> combined;      ///< C in either domain until A in both
  std::array<double, 3> occupancy_image{}, occupancy_depth{};  ///< fractions in A, B, C
  std::vector<double> straightness;   ///< per tracking episode: max deviation of the tip path / chord
  int tracking_episodes = 0;
  int fallbacks = 0;
  int moving_ticks = 0;            ///< ticks with a nonzero tip command
  int hysteresis_violations = 0;   ///< servo ticks while the true target stayed in A or B since HOLDING
  int rejected = 0;
};

/// Measures are taken on the ground-truth target.
MetricsReport compute_metrics(const RunLog& log);

/// Compact JSON summary.
std::string metrics_json(const MetricsReport& m, const std::string& name);

}  // namespace endotrack::sim
