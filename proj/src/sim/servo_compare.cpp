#include "endotrack/sim/servo_compare.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "endotrack/error.hpp"

namespace endotrack::sim {

namespace fs = std::filesystem;

const char* const kServoColumns = "t,tip_x,tip_y,tip_z,s_x,s_y,s_z,v_x,v_y,v_z,weight,e_n";

double ServoRun::chord() const {
  return samples.empty() ? 0.0 : (samples.back().tip - samples.front().tip).norm();
}

double ServoRun::max_deviation() const {
  if (samples.size() < 2) return 0.0;
  const Vec3 a = samples.front().tip, d = samples.back().tip - a;
  if (d.norm() == 0) return 0.0;
  const Vec3 u = d.normalized();
  double dev = 0;
  for (const auto& s : samples) {
    const Vec3 r = s.tip - a;
    dev = std::max(dev, (r - r.dot(u) * u).norm());
  }
  return dev;
}

double ServoRun::final_depth_error(double z_star) const {
  return samples.empty() ? 0.0 : std::abs(samples.back().s.z() - z_star);
}

void ServoRun::fit_decay(const Vec3& s_star, double* rate, double* r2, double floor) const {
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0, syy = 0;
  for (const auto& s : samples) {
    const double e = (s.s - s_star).norm();
    if (e <= floor) break;
    const double y = std::log(e);
    n += 1;
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    syy += y * y;
  }
  *rate = 0;
  *r2 = 0;
  if (n < 3) return;
  const double vt = stt - st * st / n, vy = syy - sy * sy / n, cty = sty - st * sy / n;
  if (vt <= 0) return;
  *rate = -cty / vt;
  *r2 = vy > 0 ? cty * cty / (vt * vy) : 1.0;
}

bool ServoRun::weight_switches_within(double lo, double hi) const {
  for (const auto& s : samples) {
    if (s.e_n >= hi && s.weight != 1.0) return false;
    if (s.e_n <= lo && s.weight != 0.0) return false;
    if (s.weight < 0.0 || s.weight > 1.0) return false;
  }
  return true;
}

const ServoRun& ServoCompareReport::find(servo::Method m, const std::string& label) const {
  for (const auto& r : runs)
    if (r.method == m && r.label == label) return r;
  throw Error(Errc::ConfigInvalid, std::string("no run for ") + servo::to_string(m) + " " + label);
}

nlohmann::json ServoCompareReport::to_json(const servo::ServoConfig& cfg) const {
  nlohmann::json j;
  j["seconds"] = seconds;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    double rate = 0, r2 = 0;
    r.fit_decay(cfg.s_star, &rate, &r2);
    const double chord = r.chord();
    j["runs"].push_back({{"method", servo::to_string(r.method)},
                         {"case", r.label},
                         {"chord", chord},
                         {"max_deviation", r.max_deviation()},
                         {"straightness", chord > 0 ? r.max_deviation() / chord : 0.0},
                         {"final_depth_error", r.final_depth_error(cfg.s_star.z())},
                         {"final_error", (r.samples.back().s - cfg.s_star).norm()},
                         {"decay_rate", rate},
                         {"decay_r2", r2}});
    if (r.method == servo::Method::HYBRID)
      j["runs"].back()["weight_switch_ok"] = r.weight_switches_within(cfg.hybrid_lo, cfg.hybrid_hi);
  }
  return j;
}

ServoCompareReport servo_compare(const ServoCompareOptions& opt) {
  opt.model.validate();
  opt.servo.validate();
  if (!(opt.dt > 0) || !(opt.duration > 0)) throw Error(Errc::ConfigInvalid, "servo-compare dt and duration must be positive");
  const auto start = std::chrono::steady_clock::now();
  ServoCompareReport rep;
  const geom::EndoscopePose pose0 = geom::pose_from_joints(opt.start);
  const long steps = std::lround(opt.duration / opt.dt);
  for (const auto& [label, s0] : opt.cases) {
    const Vec3 target = geom::frames_from_pose(pose0, opt.model).camera * s0;
    for (const auto method : opt.methods) {
      servo::ServoConfig cfg = opt.servo;
      cfg.method = method;
      ServoRun run;
      run.method = method;
      run.label = label;
      run.samples.reserve(steps + 1);
      geom::EndoscopePose pose = pose0;
      for (long k = 0; k <= steps; ++k) {
        ServoSample smp;
        smp.t = k * opt.dt;
        smp.tip = pose.tip_position();
        smp.s = geom::frames_from_pose(pose, opt.model).camera.inverse() * target;
        const servo::ServoCommand c = servo::servo_command(cfg, {smp.s}, opt.model, pose, target);
        smp.v = c.v_tip;
        smp.weight = c.weight;
        smp.e_n = c.e_n_norm;
        run.samples.push_back(smp);
        pose = geom::integrate_tip_velocity(pose, c.v_tip, opt.dt);
        if (!pose.rotation.allFinite() || !std::isfinite(pose.l) || std::abs(pose.l) > 1.0)
          throw Error(Errc::DivergedSimulation, std::string(servo::to_string(method)) + " diverged");
      }
      rep.runs.push_back(std::move(run));
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

void write_servo_csv(const std::string& path, const ServoRun& run) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << kServoColumns << '\n' << std::setprecision(10);
  for (const auto& s : run.samples)
    out << s.t << ',' << s.tip.x() << ',' << s.tip.y() << ',' << s.tip.z() << ',' << s.s.x() << ',' << s.s.y() << ','
        << s.s.z() << ',' << s.v.x() << ',' << s.v.y() << ',' << s.v.z() << ',' << s.weight << ',' << s.e_n << '\n';
}

ServoCompareReport servo_compare(const std::string& dir, const ServoCompareOptions& opt) {
  ServoCompareReport rep = servo_compare(opt);
  fs::create_directories(dir);
  for (const auto& r : rep.runs) {
    std::string name = servo::to_string(r.method);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    write_servo_csv((fs::path(dir) / (name + "_" + r.label + ".csv")).string(), r);
  }
  std::ofstream out(fs::path(dir) / "report.json");
  if (!out) throw Error(Errc::Io, "cannot write " + dir + "/report.json");
  out << rep.to_json(opt.servo).dump(1) << '\n';
  return rep;
}

}  // namespace endotrack::sim
