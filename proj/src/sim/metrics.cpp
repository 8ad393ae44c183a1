#include "endotrack/sim/metrics.hpp"

#include <optional>

#include <json.hpp>

namespace endotrack::sim {

namespace {

using ait::Zone;

// Opens an episode on each entry into C and closes it on the next entry into A.
class EpisodeTracker {
 public:
  void feed(double t, Zone prev, bool has_prev, Zone cur, std::vector<Episode>& out) {
    const bool entered_c = cur == Zone::C && (!has_prev || prev != Zone::C);
    if (entered_c && !open_) {
      open_ = true;
      t_open_ = t;
    }
    if (open_ && cur == Zone::A) {
      out.push_back({t_open_, t});
      open_ = false;
    }
  }

 private:
  bool open_ = false;
  double t_open_ = 0.0;
};

Zone combined_zone(const ait::ZonePair& z) {
  if (z.any_c()) return Zone::C;
  if (z.both_a()) return Zone::A;
  return Zone::B;
}

double path_straightness(const std::vector<Vec3>& path) {
  if (path.size() < 3) return 0.0;
  const Vec3 a = path.front(), b = path.back();
  const double chord = (b - a).norm();
  if (chord < 1e-6) return 0.0;
  const Vec3 d = (b - a) / chord;
  double dev = 0;
  for (const auto& p : path) dev = std::max(dev, ((p - a) - (p - a).dot(d) * d).norm());
  return dev / chord;
}

}  // namespace

MetricsReport compute_metrics(const RunLog& log) {
  MetricsReport m;
  EpisodeTracker ti, td, tc;
  std::optional<ait::ZonePair> prev;
  std::array<int, 3> ci{}, cd{};
  int counted = 0;
  bool clean = true;
  ait::Mode prev_mode = ait::Mode::Holding;
  std::vector<Vec3> path;
  for (const auto& r : log.rows) {
    if (r.true_zones) {
      const auto& z = *r.true_zones;
      ti.feed(r.t, prev ? prev->image : Zone::A, prev.has_value(), z.image, m.image);
      td.feed(r.t, prev ? prev->depth : Zone::A, prev.has_value(), z.depth, m.depth);
      tc.feed(r.t, prev ? combined_zone(*prev) : Zone::A, prev.has_value(), combined_zone(z), m.combined);
      ++ci[static_cast<int>(z.image)];
      ++cd[static_cast<int>(z.depth)];
      ++counted;
      prev = z;
    }
    if (r.mode == ait::Mode::Holding && prev_mode != ait::Mode::Holding) clean = true;
    if (r.true_zones && r.true_zones->any_c()) clean = false;
    if (r.command == ait::CommandKind::ServoTo && clean) ++m.hysteresis_violations;
    if (r.v_tip.squaredNorm() > 0) ++m.moving_ticks;

    if (r.mode == ait::Mode::Tracking) {
      if (prev_mode != ait::Mode::Tracking) ++m.tracking_episodes;
      path.push_back(r.tip_i);
    } else if (prev_mode == ait::Mode::Tracking) {
      m.straightness.push_back(path_straightness(path));
      path.clear();
    }
    if (r.mode == ait::Mode::Fallback && prev_mode != ait::Mode::Fallback) ++m.fallbacks;
    prev_mode = r.mode;
    m.rejected = r.rejected;
  }
  if (!path.empty()) m.straightness.push_back(path_straightness(path));
  if (counted)
    for (int k = 0; k < 3; ++k) {
      m.occupancy_image[k] = static_cast<double>(ci[k]) / counted;
      m.occupancy_depth[k] = static_cast<double>(cd[k]) / counted;
    }
  return m;
}

std::string metrics_json(const MetricsReport& m, const std::string& name) {
  using nlohmann::json;
  auto durations = [](const std::vector<Episode>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"t_c", e.t_c}, {"t_a", e.t_a}, {"duration", e.duration()}});
    return a;
  };
  json j;
  j["scenario"] = name;
  j["correction_image"] = durations(m.image);
  j["correction_depth"] = durations(m.depth);
  j["correction_combined"] = durations(m.combined);
  j["occupancy_image"] = m.occupancy_image;
  j["occupancy_depth"] = m.occupancy_depth;
  j["straightness"] = m.straightness;
  j["tracking_episodes"] = m.tracking_episodes;
  j["fallbacks"] = m.fallbacks;
  j["moving_ticks"] = m.moving_ticks;
  j["hysteresis_violations"] = m.hysteresis_violations;
  j["rejected_matches"] = m.rejected;
  return j.dump(2) + "\n";
}

}  // namespace endotrack::sim
