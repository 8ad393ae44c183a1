#pragma once

#include <optional>
#include <string>

#include "endotrack/geom.hpp"

namespace endotrack::ait {

enum class Zone { A, B, C };
enum class Mode { Holding, Tracking, Fallback };
enum class Instruction { TrackLeft, TrackRight, TrackWeighted, Disabled };
enum class CommandKind { Hold, ServoTo, EnterFallback };

const char* to_string(Zone z);
const char* to_string(Mode m);
const char* to_string(Instruction i);
const char* to_string(CommandKind k);
Instruction instruction_from_string(const std::string& name);

struct AitConfig {
  double w_d = 0.5;
  double z_star = 0.08;
  double zone_a = 0.40;  ///< radial fractions of the content circle; they sum to one
  double zone_b = 0.20;
  double zone_c = 0.40;
  double depth_target = 0.03;     ///< |z - z_star| below this is zone A
  double depth_violation = 0.05;  ///< at or beyond this is zone C
  double lost_timeout = 10.0;     ///< s without a target before falling back
  Instruction instruction = Instruction::TrackWeighted;

  void validate() const;
};

struct ZonePair {
  Zone image = Zone::A;
  Zone depth = Zone::A;

  bool any_c() const { return image == Zone::C || depth == Zone::C; }
  bool both_a() const { return image == Zone::A && depth == Zone::A; }
  bool operator==(const ZonePair&) const = default;
};

/// Projected radial fraction of `s` in the content circle (unclamped).
double radial_fraction(const Vec3& s, const geom::CameraIntrinsics& intr);
Zone image_zone(double r, const AitConfig& cfg);
Zone depth_zone(double z, double z_star, const AitConfig& cfg);
ZonePair classify_zone(const Vec3& s, const geom::CameraIntrinsics& intr, const AitConfig& cfg, double z_star);
ZonePair classify_zone(const Vec3& s, const geom::CameraIntrinsics& intr, const AitConfig& cfg);

struct TipPair {
  std::optional<Vec3> left, right;  ///< camera frame (m)
};

/// (1 - w_d) s_l + w_d s_r. A single present tip is returned as is.
/// Throws InvalidWeight for w_d outside [0, 1] and NoTips when both are absent.
Vec3 virtual_tip(const std::optional<Vec3>& s_l, const std::optional<Vec3>& s_r, double w_d);

struct AitState {
  Mode mode = Mode::Holding;
  Instruction instruction = Instruction::TrackWeighted;
  double w_d = 0.5;
  double z_star = 0.08;
  double now = 0.0;
  double last_seen = 0.0;
  std::optional<ZonePair> previous;  ///< zones of the last sample with a target

  static AitState initial(const AitConfig& cfg, double t0 = 0.0);
};

/// Point the supervisor follows under the current instruction, if any tip allows it.
std::optional<Vec3> tracked_target(const AitState& state, const TipPair& tips);

struct AitCommand {
  CommandKind kind = CommandKind::Hold;
  Vec3 s = Vec3::Zero();       ///< tracked feature (camera frame)
  Vec3 s_star = Vec3::Zero();  ///< goal for ServoTo
};

struct AitEvent {
  double t = 0.0;
  Mode from = Mode::Holding, to = Mode::Holding;
  std::optional<ZonePair> zones;
  CommandKind command = CommandKind::Hold;
};

struct AitStep {
  AitCommand command;
  std::optional<Vec3> target;  ///< virtual tip this step, if any
  std::optional<ZonePair> zones;
  std::optional<AitEvent> event;  ///< set when the mode changed
};

/// One supervisor update. Activation needs a crossing into zone C in either
/// domain (previous sample in A or B, or no previous sample); deactivation
/// needs zone A in both.
AitStep step(AitState& state, const TipPair& tips, double now, const AitConfig& cfg,
             const geom::CameraIntrinsics& intr);

enum class InstructionKind { TrackLeft, TrackRight, TrackWeighted, SetZoom, Disable, ResetFromFallback };

const char* to_string(InstructionKind k);
InstructionKind instruction_kind_from_string(const std::string& name);

struct InstructionRecord {
  InstructionKind kind = InstructionKind::TrackWeighted;
  double value = 0.5;  ///< w_d for TrackWeighted, z_star for SetZoom
};

/// Throws InvalidWeight for TrackWeighted outside [0, 1] and ConfigInvalid for a non-positive zoom.
void apply_instruction(AitState& state, const InstructionRecord& instruction);

}  // namespace endotrack::ait
