#include "endotrack/sim/loop.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "endotrack/error.hpp"
#include "endotrack/tipfilter.hpp"

namespace endotrack::sim {

const char* const kRunLogColumns =
    "t,theta1,theta2,l,roll,tip_x,tip_y,tip_z,true_x,true_y,true_z,est_x,est_y,est_z,"
    "true_image_zone,true_depth_zone,est_image_zone,est_depth_zone,mode,command,v_x,v_y,v_z,weight,e_n,fused,rejected";

namespace {

struct Packet {
  double available = 0.0;
  std::optional<tipfilter::TipObservation> left, right;
  int rejected = 0;
};

struct Sides {
  std::optional<Vec3> left, right;
};

// Tracked points of the instruments that are in view, per side (camera frame).
Sides true_tips(const Scene& scene, const geom::RigidTransform& camera, const geom::CameraIntrinsics& in) {
  const geom::RigidTransform inv = camera.inverse();
  Sides s;
  for (const auto& ins : scene.instruments) {
    const Vec3 p = inv * ins.tracked_point();
    if (!(p.z() > 0) || (in.project(p) - in.content_center()).norm() > in.content_radius()) continue;
    (ins.side == Side::Left ? s.left : s.right) = p;
  }
  return s;
}

class Sensor {
 public:
  Sensor(const ScenarioConfig& sc, Exec exec)
      : sc_(sc), exec_(exec), rng_(sc.seed), geo_(tiplocate::ProcessingGeometry::for_image(sc.model.intrinsics.width,
                                                                                        sc.model.intrinsics.height)) {}

  Packet capture(const Scene& scene, const geom::RigidTransform& camera, double t) {
    Packet p;
    p.available = t + sc_.sensor.delay;
    std::bernoulli_distribution drop(sc_.sensor.dropout);
    if (drop(rng_)) return p;
    const auto& in = sc_.model.intrinsics;
    std::vector<std::pair<Side, Vec3>> obs;
    if (sc_.sensor.perception == Perception::Truth) {
      const Sides s = true_tips(scene, camera, in);
      if (s.left) obs.emplace_back(Side::Left, tipfilter::observe(*s.left, in));
      if (s.right) obs.emplace_back(Side::Right, tipfilter::observe(*s.right, in));
    } else {
      RenderOptions masks;
      masks.intensity = false;
      const StereoFrame mf = render_stereo(scene, camera, in, masks, exec_);
      tiplocate::FrameResult fr = tiplocate::detect_frame(mf.mask_left, geo_, sc_.localizer, exec_);
      RenderOptions views;
      views.mask = false;
      for (const auto& d : fr.detections)
        for (const auto& tip : d.tips) views.regions.push_back(tiplocate::stereo_support(tip, sc_.localizer.stereo));
      if (!views.regions.empty()) {
        const StereoFrame vf = render_stereo(scene, camera, in, views, exec_);
        tiplocate::measure_tips(fr, vf.left, vf.right, sc_.localizer, t, exec_);
      }
      p.rejected = fr.rejected;
      for (Side side : {Side::Left, Side::Right}) {
        Vec3 sum = Vec3::Zero();
        int n = 0;
        for (const auto& m : fr.measurements)
          if (m.side == side) {
            sum += m.observation.vector();
            ++n;
          }
        if (n) obs.emplace_back(side, sum / n);
      }
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& [side, z] : obs) {
      if (sc_.sensor.pixel_noise > 0)
        for (int i = 0; i < 3; ++i) z[i] += sc_.sensor.pixel_noise * noise(rng_);
      const tipfilter::TipObservation o{z.x(), z.y(), z.z(), t};
      (side == Side::Left ? p.left : p.right) = o;
    }
    return p;
  }

 private:
  const ScenarioConfig& sc_;
  Exec exec_;
  std::mt19937_64 rng_;
  tiplocate::ProcessingGeometry geo_;
};

void put(std::ostream& o, double v) { o << ',' << v; }
void put(std::ostream& o, const std::optional<Vec3>& v) {
  for (int i = 0; i < 3; ++i) {
    o << ',';
    if (v) o << (*v)[i];
  }
}

}  // namespace

void write_runlog_csv(const RunLog& log, std::ostream& out) {
  std::ostringstream o;
  o << std::setprecision(10);
  o << kRunLogColumns << '\n';
  for (const auto& r : log.rows) {
    o << r.t;
    put(o, r.joints.theta1);
    put(o, r.joints.theta2);
    put(o, r.joints.l);
    put(o, r.roll);
    for (int i = 0; i < 3; ++i) put(o, r.tip_i[i]);
    put(o, r.true_target);
    put(o, r.est_target);
    for (const auto* z : {&r.true_zones, &r.est_zones}) {
      o << ',' << (*z ? ait::to_string((*z)->image) : "");
      o << ',' << (*z ? ait::to_string((*z)->depth) : "");
    }
    o << ',' << ait::to_string(r.mode) << ',' << ait::to_string(r.command);
    for (int i = 0; i < 3; ++i) put(o, r.v_tip[i]);
    put(o, r.weight);
    put(o, r.e_n);
    o << ',' << r.fused << ',' << r.rejected << '\n';
  }
  out << o.str();
}

void write_runlog_csv(const RunLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_runlog_csv(log, out);
}

struct ClosedLoop::Impl {
  Impl(const ScenarioConfig& c, Exec exec)
      : sc(c),
        home(geom::pose_from_joints(c.joints)),
        pose(home),
        f_left(c.ekf, c.model.intrinsics),
        f_right(c.ekf, c.model.intrinsics),
        state(ait::AitState::initial(c.ait, 0.0)),
        sensor(sc, exec) {
    scene = sc.scene;
    step_scene(scene, 0.0);
    prev_camera = geom::frames_from_pose(pose, sc.model).camera;
  }

  void apply(const ait::InstructionRecord& ins) {
    const bool rehome = ins.kind == ait::InstructionKind::ResetFromFallback && state.mode == ait::Mode::Fallback;
    ait::apply_instruction(state, ins);
    if (rehome) {
      pose = home;
      f_left.reset();
      f_right.reset();
    }
  }

  ScenarioConfig sc;
  Scene scene;
  const geom::EndoscopePose home;
  geom::EndoscopePose pose;
  tipfilter::TipFilter f_left, f_right;
  ait::AitState state;
  Sensor sensor;
  std::deque<Packet> fifo;
  std::vector<ait::AitEvent> events;
  geom::RigidTransform prev_camera;
  size_t next_instruction = 0;
  long tick = 0;
  long captures = 0;
  int rejected = 0;
  bool scripted = true;
};

ClosedLoop::ClosedLoop(const ScenarioConfig& sc, Exec exec) {
  sc.validate();
  impl_ = std::make_unique<Impl>(sc, exec);
}

ClosedLoop::~ClosedLoop() = default;

double ClosedLoop::time() const { return static_cast<double>(impl_->tick) / impl_->sc.control_rate; }
const ScenarioConfig& ClosedLoop::config() const { return impl_->sc; }
Scene& ClosedLoop::scene() { return impl_->scene; }
const Scene& ClosedLoop::scene() const { return impl_->scene; }
const ait::AitState& ClosedLoop::ait_state() const { return impl_->state; }
const geom::EndoscopePose& ClosedLoop::pose() const { return impl_->pose; }
geom::RigidTransform ClosedLoop::camera() const { return geom::frames_from_pose(impl_->pose, impl_->sc.model).camera; }
const std::vector<ait::AitEvent>& ClosedLoop::events() const { return impl_->events; }
void ClosedLoop::set_scripted(bool on) { impl_->scripted = on; }
void ClosedLoop::apply(const ait::InstructionRecord& ins) { impl_->apply(ins); }

std::optional<LogRow> ClosedLoop::step() {
  Impl& m = *impl_;
  const auto& sc = m.sc;
  const auto& model = sc.model;
  const auto& in = model.intrinsics;
  const double dt = 1.0 / sc.control_rate;
  const long k = m.tick;
  const double t = time();
  if (m.scripted) {
    try {
      step_scene(m.scene, t);
    } catch (const Error& e) {
      if (e.code() == Errc::ScriptExhausted) return std::nullopt;
      throw;
    }
  }
  const geom::RigidTransform camera = geom::frames_from_pose(m.pose, model).camera;

  if (t + 1e-9 >= static_cast<double>(m.captures) / sc.sensor.rate) {
    m.fifo.push_back(m.sensor.capture(m.scene, camera, t));
    ++m.captures;
  }

  const Vec6 twist = k == 0 ? Vec6::Zero() : geom::relative_twist(m.prev_camera, camera, dt);
  const Mat3 r_c_i = camera.rotation.transpose();
  m.f_left.predict(t, twist, r_c_i);
  m.f_right.predict(t, twist, r_c_i);

  LogRow row;
  while (!m.fifo.empty() && m.fifo.front().available <= t + 1e-9) {
    const Packet p = m.fifo.front();
    m.fifo.pop_front();
    m.rejected += p.rejected;
    if (p.left) {
      m.f_left.update(*p.left);
      ++row.fused;
    }
    if (p.right) {
      m.f_right.update(*p.right);
      ++row.fused;
    }
  }

  while (m.next_instruction < sc.instructions.size() && sc.instructions[m.next_instruction].t <= t + 1e-9)
    m.apply(sc.instructions[m.next_instruction++].instruction);

  ait::TipPair est;
  if (m.f_left.has_estimate()) est.left = m.f_left.state()->s_c;
  if (m.f_right.has_estimate()) est.right = m.f_right.state()->s_c;
  const ait::AitStep st = ait::step(m.state, est, t, sc.ait, in);
  if (st.event) m.events.push_back(*st.event);

  const Sides truth = true_tips(m.scene, camera, in);
  row.t = t;
  row.joints = geom::joints_from_pose(m.pose);
  row.roll = geom::roll_deviation(m.pose);
  row.tip_i = m.pose.tip_position();
  row.true_target = ait::tracked_target(m.state, {truth.left, truth.right});
  if (row.true_target) row.true_zones = ait::classify_zone(*row.true_target, in, sc.ait, m.state.z_star);
  row.est_target = st.target;
  row.est_zones = st.zones;
  row.mode = m.state.mode;
  row.command = st.command.kind;
  row.rejected = m.rejected;

  Vec3 v = Vec3::Zero();
  if (st.command.kind == ait::CommandKind::ServoTo) {
    servo::ServoConfig cfg = sc.servo;
    cfg.s_star = st.command.s_star;
    try {
      const auto c = servo::servo_command(cfg, servo::Feature3D{st.command.s}, model, m.pose);
      v = servo::limit_velocity(c.v_tip, cfg.v_max);
      row.weight = c.weight;
      row.e_n = c.e_n_norm;
    } catch (const Error& e) {
      if (e.code() != Errc::SingularInteraction && e.code() != Errc::FeatureBehindCamera) throw;
    }
  }
  row.v_tip = v;

  if (row.true_target && ((*row.true_target - Vec3(0, 0, m.state.z_star)).norm() > 1.0))
    throw Error(Errc::DivergedSimulation, "tracked point left the 1 m bound at t = " + std::to_string(t));
  if (!m.pose.rotation.allFinite() || !std::isfinite(m.pose.l) || m.pose.l > 1.0)
    throw Error(Errc::DivergedSimulation, "endoscope state diverged at t = " + std::to_string(t));

  m.prev_camera = camera;
  m.pose = geom::integrate_tip_velocity(m.pose, v, dt);
  ++m.tick;
  return row;
}

RunLog run_closed_loop(const ScenarioConfig& sc, Exec exec) {
  ClosedLoop loop(sc, exec);
  RunLog log;
  log.name = sc.name;
  log.dt = 1.0 / sc.control_rate;
  log.z_star = sc.ait.z_star;
  const long steps = std::lround(sc.duration * sc.control_rate);
  for (long k = 0; k <= steps; ++k) {
    auto row = loop.step();
    if (!row) break;
    log.rows.push_back(std::move(*row));
  }
  log.events = loop.events();
  return log;
}

}  // namespace endotrack::sim
