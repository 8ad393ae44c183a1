#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "endotrack/ait.hpp"
#include "endotrack/exec.hpp"
#include "endotrack/sim/scenario.hpp"

namespace endotrack::sim {

/// One control tick. Optional members are empty when undefined (no target, no estimate).
struct LogRow {
  double t = 0.0;
  geom::JointState joints;
  double roll = 0.0;
  Vec3 tip_i = Vec3::Zero();  ///< scope tip, incision frame
  std::optional<Vec3> true_target, est_target;  ///< camera frame
  std::optional<ait::ZonePair> true_zones, est_zones;
  ait::Mode mode = ait::Mode::Holding;
  ait::CommandKind command = ait::CommandKind::Hold;
  Vec3 v_tip = Vec3::Zero();  ///< applied tip velocity, frame {t}
  double weight = 0.0, e_n = 0.0;
  int fused = 0;     ///< measurements fused this tick
  int rejected = 0;  ///< unconfident stereo matches so far
};

struct RunLog {
  std::string name;
  double dt = 0.01;
  double z_star = 0.08;
  std::vector<LogRow> rows;
  std::vector<ait::AitEvent> events;
};

/// Column order of the CSV export.
extern const char* const kRunLogColumns;

void write_runlog_csv(const RunLog& log, std::ostream& out);
void write_runlog_csv(const RunLog& log, const std::string& path);

/// Steppable closed loop: scene, delayed sensing, filters, supervisor, servo.
class ClosedLoop {
 public:
  explicit ClosedLoop(const ScenarioConfig& scenario, Exec exec = Exec::Parallel);
  ~ClosedLoop();
  ClosedLoop(const ClosedLoop&) = delete;
  ClosedLoop& operator=(const ClosedLoop&) = delete;

  /// Advances one control tick; nullopt once a script has ended.
  std::optional<LogRow> step();
  /// Time of the next tick.
  double time() const;

  const ScenarioConfig& config() const;
  Scene& scene();
  const Scene& scene() const;
  const ait::AitState& ait_state() const;
  const geom::EndoscopePose& pose() const;
  geom::RigidTransform camera() const;
  const std::vector<ait::AitEvent>& events() const;

  /// When off, scripts no longer move the instruments; tips stay wherever they were put.
  void set_scripted(bool on);
  /// Immediate instruction; a reset out of FALLBACK re-homes the scope.
  void apply(const ait::InstructionRecord& ins);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs the scenario at the control rate with delayed, rate-limited sensing.
/// Throws DivergedSimulation when the tracked point leaves a 1 m ball around s*.
RunLog run_closed_loop(const ScenarioConfig& scenario, Exec exec = Exec::Parallel);

}  // namespace endotrack::sim
