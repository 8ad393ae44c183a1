#include "endotrack/ait.hpp"

#include <cmath>
#include <limits>

#include "endotrack/error.hpp"

namespace endotrack::ait {

const char* to_string(Zone z) {
  switch (z) {
    case Zone::A: return "A";
    case Zone::B: return "B";
    case Zone::C: return "C";
  }
  return "?";
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Holding: return "HOLDING";
    case Mode::Tracking: return "TRACKING";
    case Mode::Fallback: return "FALLBACK";
  }
  return "?";
}

const char* to_string(Instruction i) {
  switch (i) {
    case Instruction::TrackLeft: return "TRACK_LEFT";
    case Instruction::TrackRight: return "TRACK_RIGHT";
    case Instruction::TrackWeighted: return "TRACK_WEIGHTED";
    case Instruction::Disabled: return "DISABLED";
  }
  return "?";
}

const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::Hold: return "HOLD";
    case CommandKind::ServoTo: return "SERVO_TO";
    case CommandKind::EnterFallback: return "ENTER_FALLBACK";
  }
  return "?";
}

const char* to_string(InstructionKind k) {
  switch (k) {
    case InstructionKind::TrackLeft: return "TRACK_LEFT";
    case InstructionKind::TrackRight: return "TRACK_RIGHT";
    case InstructionKind::TrackWeighted: return "TRACK_WEIGHTED";
    case InstructionKind::SetZoom: return "SET_ZOOM";
    case InstructionKind::Disable: return "DISABLE";
    case InstructionKind::ResetFromFallback: return "RESET_FROM_FALLBACK";
  }
  return "?";
}

Instruction instruction_from_string(const std::string& name) {
  for (auto i : {Instruction::TrackLeft, Instruction::TrackRight, Instruction::TrackWeighted, Instruction::Disabled})
    if (name == to_string(i)) return i;
  throw Error(Errc::ConfigInvalid, "unknown instruction '" + name + "'");
}

InstructionKind instruction_kind_from_string(const std::string& name) {
  for (auto k : {InstructionKind::TrackLeft, InstructionKind::TrackRight, InstructionKind::TrackWeighted,
                 InstructionKind::SetZoom, InstructionKind::Disable, InstructionKind::ResetFromFallback})
    if (name == to_string(k)) return k;
  throw Error(Errc::ConfigInvalid, "unknown instruction '" + name + "'");
}

void AitConfig::validate() const {
  if (!(w_d >= 0.0 && w_d <= 1.0)) throw Error(Errc::InvalidWeight, "ait.w_d must lie in [0, 1]");
  if (!(z_star > 0.0)) throw Error(Errc::ConfigInvalid, "ait.z_star must be positive");
  if (!(zone_a > 0.0 && zone_b > 0.0 && zone_c > 0.0) || std::abs(zone_a + zone_b + zone_c - 1.0) > 1e-9)
    throw Error(Errc::ConfigInvalid, "ait zone fractions must be positive and sum to 1");
  if (!(depth_target > 0.0 && depth_target < depth_violation))
    throw Error(Errc::ConfigInvalid, "ait.depth_target must satisfy 0 < depth_target < depth_violation");
  if (!(lost_timeout > 0.0)) throw Error(Errc::ConfigInvalid, "ait.lost_timeout must be positive");
}

double radial_fraction(const Vec3& s, const geom::CameraIntrinsics& intr) {
  if (!(s.z() > 0.0)) return std::numeric_limits<double>::infinity();
  return (intr.project(s) - intr.content_center()).norm() / intr.content_radius();
}

Zone image_zone(double r, const AitConfig& cfg) {
  if (r < cfg.zone_a) return Zone::A;
  if (r < cfg.zone_a + cfg.zone_b) return Zone::B;
  return Zone::C;
}

Zone depth_zone(double z, double z_star, const AitConfig& cfg) {
  const double e = std::abs(z - z_star);
  if (e < cfg.depth_target) return Zone::A;
  if (e < cfg.depth_violation) return Zone::B;
  return Zone::C;
}

ZonePair classify_zone(const Vec3& s, const geom::CameraIntrinsics& intr, const AitConfig& cfg, double z_star) {
  return {image_zone(radial_fraction(s, intr), cfg), depth_zone(s.z(), z_star, cfg)};
}

ZonePair classify_zone(const Vec3& s, const geom::CameraIntrinsics& intr, const AitConfig& cfg) {
  return classify_zone(s, intr, cfg, cfg.z_star);
}

Vec3 virtual_tip(const std::optional<Vec3>& s_l, const std::optional<Vec3>& s_r, double w_d) {
  if (!(w_d >= 0.0 && w_d <= 1.0)) throw Error(Errc::InvalidWeight, "w_d = " + std::to_string(w_d));
  if (s_l && s_r) return (1.0 - w_d) * *s_l + w_d * *s_r;
  if (s_l) return *s_l;
  if (s_r) return *s_r;
  throw Error(Errc::NoTips, "no tip to track");
}

AitState AitState::initial(const AitConfig& cfg, double t0) {
  AitState s;
  s.instruction = cfg.instruction;
  s.w_d = cfg.instruction == Instruction::TrackLeft ? 0.0 : cfg.instruction == Instruction::TrackRight ? 1.0 : cfg.w_d;
  s.z_star = cfg.z_star;
  s.now = t0;
  s.last_seen = t0;
  return s;
}

std::optional<Vec3> tracked_target(const AitState& st, const TipPair& tips) {
  switch (st.instruction) {
    case Instruction::TrackLeft: return tips.left;
    case Instruction::TrackRight: return tips.right;
    case Instruction::TrackWeighted:
      if (!tips.left && !tips.right) return std::nullopt;
      return virtual_tip(tips.left, tips.right, st.w_d);
    case Instruction::Disabled: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

bool crossed_into_c(Zone prev, Zone cur) { return cur == Zone::C && prev != Zone::C; }

}  // namespace

AitStep step(AitState& state, const TipPair& tips, double now, const AitConfig& cfg,
             const geom::CameraIntrinsics& intr) {
  AitStep out;
  const Mode before = state.mode;
  state.now = now;
  out.target = tracked_target(state, tips);
  const Vec3 goal(0.0, 0.0, state.z_star);

  if (out.target) {
    state.last_seen = now;
    out.zones = classify_zone(*out.target, intr, cfg, state.z_star);
  }

  if (state.mode != Mode::Fallback) {
    if (!out.target) {
      if (state.instruction != Instruction::Disabled && now - state.last_seen > cfg.lost_timeout) {
        state.mode = Mode::Fallback;
        out.command.kind = CommandKind::EnterFallback;
      }
    } else {
      const ZonePair z = *out.zones;
      if (state.mode == Mode::Holding) {
        const bool crossed = !state.previous || crossed_into_c(state.previous->image, z.image) ||
                             crossed_into_c(state.previous->depth, z.depth);
        if (z.any_c() && crossed) state.mode = Mode::Tracking;
      } else if (z.both_a()) {
        state.mode = Mode::Holding;
      }
      if (state.mode == Mode::Tracking) {
        out.command.kind = CommandKind::ServoTo;
        out.command.s = *out.target;
        out.command.s_star = goal;
      }
      state.previous = z;
    }
  }

  if (state.mode != before) out.event = AitEvent{now, before, state.mode, out.zones, out.command.kind};
  return out;
}

void apply_instruction(AitState& state, const InstructionRecord& ins) {
  switch (ins.kind) {
    case InstructionKind::TrackLeft:
      state.instruction = Instruction::TrackLeft;
      state.w_d = 0.0;
      break;
    case InstructionKind::TrackRight:
      state.instruction = Instruction::TrackRight;
      state.w_d = 1.0;
      break;
    case InstructionKind::TrackWeighted:
      if (!(ins.value >= 0.0 && ins.value <= 1.0))
        throw Error(Errc::InvalidWeight, "w_d = " + std::to_string(ins.value));
      state.instruction = Instruction::TrackWeighted;
      state.w_d = ins.value;
      break;
    case InstructionKind::SetZoom:
      if (!(ins.value > 0.0)) throw Error(Errc::ConfigInvalid, "zoom depth must be positive");
      state.z_star = ins.value;
      break;
    case InstructionKind::Disable:
      state.instruction = Instruction::Disabled;
      if (state.mode == Mode::Tracking) state.mode = Mode::Holding;
      break;
    case InstructionKind::ResetFromFallback:
      if (state.mode == Mode::Fallback) {
        state.mode = Mode::Holding;
        state.last_seen = state.now;
        state.previous.reset();
        if (state.instruction == Instruction::Disabled) state.instruction = Instruction::TrackWeighted;
      }
      break;
  }
}

}  // namespace endotrack::ait
