#include "endotrack/sim/scene.hpp"

#include <cmath>

#include "endotrack/error.hpp"

namespace endotrack::sim {

std::optional<double> intersect(const Capsule& c, const Vec3& origin, const Vec3& dir_in) {
  const double scale = dir_in.norm();
  const Vec3 rd = dir_in / scale;
  const Vec3 ba = c.b - c.a, oa = origin - c.a;
  const double baba = ba.dot(ba), bard = ba.dot(rd), baoa = ba.dot(oa), rdoa = rd.dot(oa), oaoa = oa.dot(oa);
  const double r2 = c.radius * c.radius;
  double best = -1.0;
  const double qa = baba - bard * bard;
  if (qa > 1e-18 * baba) {
    const double qb = baba * rdoa - baoa * bard;
    const double qc = baba * oaoa - baoa * baoa - r2 * baba;
    const double h = qb * qb - qa * qc;
    if (h >= 0.0) {
      const double t = (-qb - std::sqrt(h)) / qa;
      const double y = baoa + t * bard;
      if (t > 0.0 && y > 0.0 && y < baba) best = t;
    }
  }
  for (const Vec3* centre : {&c.a, &c.b}) {
    const Vec3 oc = origin - *centre;
    const double b = rd.dot(oc), cc = oc.dot(oc) - r2;
    const double h = b * b - cc;
    if (h < 0.0) continue;
    const double t = -b - std::sqrt(h);
    if (t > 0.0 && (best < 0.0 || t < best)) best = t;
  }
  if (best < 0.0) return std::nullopt;
  return best / scale;
}

Vec3 TipScript::at(double t) const {
  if (points.empty()) throw Error(Errc::ScriptExhausted, "empty script");
  if (t <= points.front().t) return points.front().p;
  if (t > points.back().t + 1e-12) throw Error(Errc::ScriptExhausted, "script ended at t = " + std::to_string(end()));
  for (size_t k = 1; k < points.size(); ++k) {
    if (t <= points[k].t) {
      const auto& a = points[k - 1];
      const auto& b = points[k];
      const double span = b.t - a.t;
      const double u = span > 0 ? (t - a.t) / span : 1.0;
      return a.p + u * (b.p - a.p);
    }
  }
  return points.back().p;
}

void TipScript::validate() const {
  if (points.empty()) throw Error(Errc::ConfigInvalid, "script needs at least one waypoint");
  for (size_t k = 1; k < points.size(); ++k)
    if (!(points[k].t >= points[k - 1].t)) throw Error(Errc::ConfigInvalid, "script waypoint times must not decrease");
}

namespace {

Vec3 jaw_normal(const Vec3& d) {
  Vec3 n = d.cross(Vec3::UnitZ());
  if (n.norm() < 1e-6) n = d.cross(Vec3::UnitX());
  return n.normalized();
}

}  // namespace

std::vector<Vec3> Instrument::tip_points() const {
  if (jaw_length <= 0.0) return {tip};
  const Vec3 d = axis(), n = jaw_normal(d);
  const double c = std::cos(jaw_opening), s = std::sin(jaw_opening);
  return {tip + jaw_length * (c * d + s * n), tip + jaw_length * (c * d - s * n)};
}

Vec3 Instrument::tracked_point() const {
  const auto pts = tip_points();
  Vec3 m = Vec3::Zero();
  for (const auto& p : pts) m += p;
  return m / static_cast<double>(pts.size());
}

std::vector<Capsule> Instrument::capsules(int index) const {
  std::vector<Capsule> out{{pivot, tip, radius, index}};
  if (jaw_length > 0.0)
    for (const auto& e : tip_points()) out.push_back({tip, e, jaw_radius, index});
  return out;
}

void Scene::validate() const {
  if (instruments.size() > 2) throw Error(Errc::ConfigInvalid, "scene.instruments holds at most two instruments");
  for (size_t i = 0; i < instruments.size(); ++i) {
    const auto& in = instruments[i];
    const std::string key = "scene.instruments[" + std::to_string(i) + "]";
    if (!(in.radius > 0)) throw Error(Errc::ConfigInvalid, key + ".radius must be positive");
    if (in.jaw_length < 0) throw Error(Errc::ConfigInvalid, key + ".jaw_length must not be negative");
    if (in.jaw_length > 0 && !(in.jaw_radius > 0)) throw Error(Errc::ConfigInvalid, key + ".jaw_radius must be positive");
    if ((in.tip - in.pivot).norm() < 1e-6) throw Error(Errc::ConfigInvalid, key + " tip coincides with its pivot");
    in.script.validate();
  }
  if (!(tissue_depth > 0)) throw Error(Errc::ConfigInvalid, "scene.tissue_depth must be positive");
}

void step_scene(Scene& scene, double t) {
  for (auto& in : scene.instruments)
    if (!in.script.points.empty()) in.tip = in.script.at(t);
}

}  // namespace endotrack::sim
