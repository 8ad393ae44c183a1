#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "endotrack/geom.hpp"
#include "endotrack/servo.hpp"

namespace endotrack::sim {

/// Canonical comparison of the servoing laws: side-entry pose, oblique scope,
/// unlimited velocity, one static target per initial depth error.
struct ServoCompareOptions {
  geom::EndoscopeModel model =
      geom::EndoscopeModel::make(0.5235987755982988, Vec3(0.001, -0.002, 0.004), 2.0943951023931957, 960, 540);
  geom::JointState start{0.25, -0.15, 0.06};
  std::vector<std::pair<std::string, Vec3>> cases{{"small", Vec3(0.075, 0.01, 0.10)},
                                                  {"large", Vec3(0.12, 0.01, 0.16)}};
  std::vector<servo::Method> methods{servo::Method::IBVS, servo::Method::IBVS_DC, servo::Method::IBVS3D,
                                     servo::Method::PBVS, servo::Method::HYBRID};
  servo::ServoConfig servo;  ///< method is overridden per run
  double dt = 2e-3;
  double duration = 10.0;
};

struct ServoSample {
  double t = 0;
  Vec3 tip = Vec3::Zero();  ///< incision frame
  Vec3 s = Vec3::Zero();    ///< camera frame
  Vec3 v = Vec3::Zero();
  double weight = 0, e_n = 0;
};

struct ServoRun {
  servo::Method method = servo::Method::HYBRID;
  std::string label;
  std::vector<ServoSample> samples;

  double chord() const;
  /// Largest distance of the tip path from its start-to-end chord.
  double max_deviation() const;
  double final_depth_error(double z_star) const;
  /// Least-squares fit of log |s - s*| against t over samples above `floor`.
  void fit_decay(const Vec3& s_star, double* rate, double* r2, double floor = 1e-7) const;
  /// Fractional weights occur only for |e_n| in (lo, hi); 1 at or above hi, 0 at or below lo.
  bool weight_switches_within(double lo, double hi) const;
};

struct ServoCompareReport {
  std::vector<ServoRun> runs;
  double seconds = 0;

  const ServoRun& find(servo::Method m, const std::string& label) const;
  nlohmann::json to_json(const servo::ServoConfig& cfg) const;
};

ServoCompareReport servo_compare(const ServoCompareOptions& opt = {});

extern const char* const kServoColumns;
void write_servo_csv(const std::string& path, const ServoRun& run);

/// Runs the comparison and writes one CSV per run plus report.json into `dir`.
ServoCompareReport servo_compare(const std::string& dir, const ServoCompareOptions& opt = {});

}  // namespace endotrack::sim
