#include "endotrack/sim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "endotrack/error.hpp"

namespace endotrack::sim {

using nlohmann::json;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Object view that records the keys it reads so leftovers can be rejected.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(Errc::ConfigInvalid, where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return as<T>(j_.at(key), at(key));
  }

  template <class T>
  T req(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw Error(Errc::ConfigInvalid, at(key) + " is missing");
    return as<T>(j_.at(key), at(key));
  }

  Vec3 vec3(const char* key, const Vec3& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number()) return Vec3::Constant(v.get<double>());
    return vector<3>(v, at(key));
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const char* key, const Eigen::Matrix<double, N, 1>& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return vector<N>(j_.at(key), at(key));
  }

  std::optional<Obj> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Obj(j_.at(key), at(key));
  }

  const json& array(const char* key) {
    seen_.insert(key);
    static const json empty = json::array();
    if (!j_.contains(key)) return empty;
    if (!j_.at(key).is_array()) throw Error(Errc::ConfigInvalid, at(key) + " must be an array");
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw Error(Errc::ConfigInvalid, at(item.key().c_str()) + " is not a known key");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "scenario" : path_; }

  template <int N>
  static Eigen::Matrix<double, N, 1> vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != N)
      throw Error(Errc::ConfigInvalid, path + " must be an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) out[i] = as<double>(v[i], path + "[" + std::to_string(i) + "]");
    return out;
  }

  template <class T>
  static T as(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw Error(Errc::ConfigInvalid, path + " must be a number");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw Error(Errc::ConfigInvalid, path + " must be finite");
      return x;
    } else if constexpr (std::is_same_v<T, json>) {
      return v;
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error(Errc::ConfigInvalid, path + " must be an integer");
      if (std::is_unsigned_v<T> && v.get<int64_t>() < 0) throw Error(Errc::ConfigInvalid, path + " must not be negative");
      return v.get<T>();
    } else {
      if (!v.is_string()) throw Error(Errc::ConfigInvalid, path + " must be a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void positive(double v, const std::string& path) {
  if (!(v > 0)) throw Error(Errc::ConfigInvalid, path + " must be positive");
}

Side side_from(const std::string& s, const std::string& path) {
  if (s == "LEFT") return Side::Left;
  if (s == "RIGHT") return Side::Right;
  throw Error(Errc::ConfigInvalid, path + " must be LEFT or RIGHT");
}

}  // namespace

void SensorModel::validate() const {
  if (!(rate > 0)) throw Error(Errc::ConfigInvalid, "sensor.rate must be positive");
  if (!(delay >= 0)) throw Error(Errc::ConfigInvalid, "sensor.delay must not be negative");
  if (!(pixel_noise >= 0)) throw Error(Errc::ConfigInvalid, "sensor.pixel_noise must not be negative");
  if (!(dropout >= 0 && dropout <= 1)) throw Error(Errc::ConfigInvalid, "sensor.dropout must lie in [0, 1]");
}

void ScenarioConfig::validate() const {
  if (!(duration > 0)) throw Error(Errc::ConfigInvalid, "duration must be positive");
  if (!(control_rate > 0)) throw Error(Errc::ConfigInvalid, "control_rate must be positive");
  if (!(joints.l > 0)) throw Error(Errc::ConfigInvalid, "joints.l must be positive");
  model.validate();
  sensor.validate();
  servo.validate();
  ait.validate();
  ekf.validate();
  localizer.validate();
  scene.validate();
  for (size_t k = 1; k < instructions.size(); ++k)
    if (instructions[k].t < instructions[k - 1].t)
      throw Error(Errc::ConfigInvalid, "instructions must be ordered by time");
}

ScenarioConfig parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("scenario is not valid JSON: ") + e.what());
  }
  ScenarioConfig sc;
  Obj top(doc, "");
  sc.name = top.get<std::string>("name", sc.name);
  sc.seed = top.get<uint64_t>("seed", sc.seed);
  sc.duration = top.get<double>("duration", sc.duration);
  sc.control_rate = top.get<double>("control_rate", sc.control_rate);

  double alpha = 30, fov = 80, baseline = 0.0016;
  int width = 1280, height = 720;
  Vec3 offset = Vec3::Zero();
  if (auto c = top.child("camera")) {
    alpha = c->get<double>("alpha_deg", alpha);
    fov = c->get<double>("fov_deg", fov);
    width = c->get<int>("width", width);
    height = c->get<int>("height", height);
    baseline = c->get<double>("baseline", baseline);
    offset = c->vec3("tip_offset", offset);
    c->finish();
    positive(width, "camera.width");
    positive(height, "camera.height");
    positive(baseline, "camera.baseline");
    if (!(fov > 0 && fov < 180)) throw Error(Errc::ConfigInvalid, "camera.fov_deg must lie in (0, 180)");
    if (!(alpha >= 0 && alpha < 90)) throw Error(Errc::ConfigInvalid, "camera.alpha_deg must lie in [0, 90)");
  }
  sc.model = geom::EndoscopeModel::make(alpha * kDeg, offset, fov * kDeg, width, height, baseline);

  if (auto j = top.child("joints")) {
    sc.joints.theta1 = j->get<double>("theta1", sc.joints.theta1);
    sc.joints.theta2 = j->get<double>("theta2", sc.joints.theta2);
    sc.joints.l = j->get<double>("l", sc.joints.l);
    j->finish();
  }
  if (!(sc.joints.l > 0)) throw Error(Errc::ConfigInvalid, "joints.l must be positive");

  if (auto s = top.child("sensor")) {
    sc.sensor.rate = s->get<double>("rate", sc.sensor.rate);
    sc.sensor.delay = s->get<double>("delay", sc.sensor.delay);
    sc.sensor.pixel_noise = s->get<double>("pixel_noise", sc.sensor.pixel_noise);
    sc.sensor.dropout = s->get<double>("dropout", sc.sensor.dropout);
    const auto p = s->get<std::string>("perception", "pipeline");
    if (p == "pipeline") {
      sc.sensor.perception = Perception::Pipeline;
    } else if (p == "truth") {
      sc.sensor.perception = Perception::Truth;
    } else {
      throw Error(Errc::ConfigInvalid, "sensor.perception must be \"pipeline\" or \"truth\"");
    }
    s->finish();
  }

  if (auto a = top.child("ait")) {
    auto& c = sc.ait;
    c.w_d = a->get<double>("w_d", c.w_d);
    c.z_star = a->get<double>("z_star", c.z_star);
    c.zone_a = a->get<double>("zone_a", c.zone_a);
    c.zone_b = a->get<double>("zone_b", c.zone_b);
    c.zone_c = a->get<double>("zone_c", c.zone_c);
    c.depth_target = a->get<double>("depth_target", c.depth_target);
    c.depth_violation = a->get<double>("depth_violation", c.depth_violation);
    c.lost_timeout = a->get<double>("lost_timeout", c.lost_timeout);
    c.instruction = ait::instruction_from_string(a->get<std::string>("instruction", ait::to_string(c.instruction)));
    a->finish();
  }

  if (auto s = top.child("servo")) {
    auto& c = sc.servo;
    c.method = servo::method_from_string(s->get<std::string>("method", servo::to_string(c.method)));
    c.lambda = s->vec3("lambda", c.lambda);
    c.v_max = s->get<double>("v_max", c.v_max);
    c.hybrid_lo = s->get<double>("hybrid_lo", c.hybrid_lo);
    c.hybrid_hi = s->get<double>("hybrid_hi", c.hybrid_hi);
    c.damping = s->get<double>("damping", c.damping);
    s->finish();
  }
  sc.servo.s_star = Vec3(0, 0, sc.ait.z_star);

  if (auto e = top.child("ekf")) {
    auto& c = sc.ekf;
    c.lambda_s = e->get<double>("lambda_s", c.lambda_s);
    c.gap_limit = e->get<double>("gap_limit", c.gap_limit);
    if (e->has("process_sd")) {
      const Vec6 sd = e->vec<6>("process_sd", Vec6::Zero());
      c.process_noise = sd.cwiseAbs2().asDiagonal();
    }
    if (e->has("observation_sd")) {
      const Vec3 sd = e->vec<3>("observation_sd", Vec3::Zero());
      c.observation_noise = sd.cwiseAbs2().asDiagonal();
    }
    e->finish();
  }

  if (auto l = top.child("localizer")) {
    auto& c = sc.localizer;
    c.band_inner = l->get<double>("band_inner", c.band_inner);
    c.entry_spur_px = l->get<double>("entry_spur_px", c.entry_spur_px);
    c.graph.min_branch_px = l->get<double>("min_branch_px", c.graph.min_branch_px);
    c.graph.merge_px = l->get<double>("merge_px", c.graph.merge_px);
    c.stereo.window = l->get<int>("window", c.stereo.window);
    c.stereo.max_disparity = l->get<int>("max_disparity", c.stereo.max_disparity);
    c.stereo.min_ncc = l->get<double>("min_ncc", c.stereo.min_ncc);
    c.stereo.min_overlap = l->get<double>("min_overlap", c.stereo.min_overlap);
    l->finish();
  }

  if (auto s = top.child("scene")) {
    sc.scene.texture_seed = s->get<unsigned>("texture_seed", sc.scene.texture_seed);
    sc.scene.tissue_depth = s->get<double>("tissue_depth", sc.scene.tissue_depth);
    const auto frame = s->get<std::string>("frame", "camera");
    geom::RigidTransform to_i;
    if (frame == "camera") {
      to_i = geom::forward_kinematics(sc.joints, sc.model).camera;
    } else if (frame != "incision") {
      throw Error(Errc::ConfigInvalid, "scene.frame must be \"camera\" or \"incision\"");
    }
    const json& list = s->array("instruments");
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string path = "scene.instruments[" + std::to_string(i) + "]";
      Obj o(list[i], path);
      Instrument in;
      in.side = side_from(o.req<std::string>("side"), path + ".side");
      in.pivot = to_i * Obj::vector<3>(o.req<json>("pivot"), path + ".pivot");
      in.radius = o.get<double>("radius", in.radius);
      in.jaw_length = o.get<double>("jaw_length", in.jaw_length);
      in.jaw_opening = o.get<double>("jaw_opening_deg", in.jaw_opening / kDeg) * kDeg;
      in.jaw_radius = o.get<double>("jaw_radius", in.jaw_radius);
      const json& wps = o.array("waypoints");
      if (wps.empty()) throw Error(Errc::ConfigInvalid, path + ".waypoints needs at least one entry");
      for (size_t k = 0; k < wps.size(); ++k) {
        const std::string wp = path + ".waypoints[" + std::to_string(k) + "]";
        Obj w(wps[k], wp);
        Waypoint p;
        p.t = w.req<double>("t");
        p.p = to_i * Obj::vector<3>(w.req<json>("p"), wp + ".p");
        w.finish();
        in.script.points.push_back(p);
      }
      in.tip = in.script.points.front().p;
      o.finish();
      sc.scene.instruments.push_back(in);
    }
    s->finish();
  }

  const json& ins = top.array("instructions");
  for (size_t k = 0; k < ins.size(); ++k) {
    const std::string path = "instructions[" + std::to_string(k) + "]";
    Obj o(ins[k], path);
    TimedInstruction ti;
    ti.t = o.req<double>("t");
    ti.instruction.kind = ait::instruction_kind_from_string(o.req<std::string>("kind"));
    ti.instruction.value = o.get<double>("value", 0.0);
    o.finish();
    sc.instructions.push_back(ti);
  }
  top.finish();
  sc.validate();
  return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigInvalid, "cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace endotrack::sim
