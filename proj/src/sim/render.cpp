#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "endotrack/sim/scene.hpp"

namespace endotrack::sim {

namespace {

constexpr double kNear = 2e-3;

uint32_t mix(uint32_t x) {
  x ^= x >> 16;
  x *= 0x7feb352dU;
  x ^= x >> 15;
  x *= 0x846ca68bU;
  x ^= x >> 16;
  return x;
}

double lattice(int64_t i, int64_t j, uint32_t seed) {
  const uint32_t h = mix(static_cast<uint32_t>(i) * 0x9e3779b1U ^ static_cast<uint32_t>(j) * 0x85ebca6bU ^ seed * 0xc2b2ae35U);
  return (h & 0xffffff) / double(0xffffff);
}

double smooth(double t) { return t * t * (3 - 2 * t); }

// Value noise in [0, 1] with unit feature size.
double noise2(double x, double y, uint32_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto i = static_cast<int64_t>(fx), j = static_cast<int64_t>(fy);
  const double u = smooth(x - fx), v = smooth(y - fy);
  const double a = lattice(i, j, seed), b = lattice(i + 1, j, seed);
  const double c = lattice(i, j + 1, seed), d = lattice(i + 1, j + 1, seed);
  return (a * (1 - u) + b * u) * (1 - v) + (c * (1 - u) + d * u) * v;
}

// Screen-space footprint of a capsule: the projected axis with a half-width
// that follows 1/z, which is affine along the projected segment.
struct Footprint {
  bool all = false, none = false;
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();
  double inv_za = 0, inv_zb = 0, rf = 0;
  double inv_ca = 0, inv_cb = 0;  // 1/z of the axis end points

  /// 0 outside, 1 near the silhouette, 2 well inside.
  int classify(double u, double v) const {
    if (all) return 1;
    if (none) return 0;
    const Vec2 p(u, v), ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d2 = (p - (a + s * ab)).squaredNorm();
    const double half = rf * (inv_za + s * (inv_zb - inv_za)) + 2.0;
    if (d2 > half * half) return 0;
    const double inner = 0.9 * rf * (inv_ca + s * (inv_cb - inv_ca)) - 1.5;
    return inner > 0 && d2 < inner * inner ? 2 : 1;
  }

  bool contains(double u, double v) const {
    if (all) return true;
    if (none) return false;
    const Vec2 p(u, v), ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double half = rf * (inv_za + s * (inv_zb - inv_za)) + 2.0;
    return (p - (a + s * ab)).squaredNorm() <= half * half;
  }
};

Footprint bound(const Capsule& c, const geom::CameraIntrinsics& in) {
  Footprint f;
  Vec3 a = c.a, b = c.b;
  const double zlim = kNear + c.radius;
  if (a.z() < zlim && b.z() < zlim) {
    if (std::max(a.z(), b.z()) + c.radius <= kNear) {
      f.none = true;
    } else {
      f.all = true;
    }
    return f;
  }
  auto clip = [&](Vec3& p, const Vec3& q) {
    if (p.z() < zlim) p = q + (zlim - q.z()) / (p.z() - q.z()) * (p - q);
  };
  clip(a, b);
  clip(b, a);
  // Sphere of radius r at depth z projects within r f / (z - r) of its centre.
  const double za = a.z() - c.radius, zb = b.z() - c.radius;
  if (std::min(za, zb) <= 0.5 * kNear) {
    f.all = true;
    return f;
  }
  f.a = in.project(a);
  f.b = in.project(b);
  f.inv_za = 1.0 / za;
  f.inv_zb = 1.0 / zb;
  f.rf = c.radius * std::max(in.fx, in.fy);
  f.inv_ca = 1.0 / a.z();
  f.inv_cb = 1.0 / b.z();
  return f;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int capsule = -1;
};

Hit trace(const std::vector<Capsule>& caps, const std::vector<Footprint>& boxes, double u, double v, const Vec3& dir) {
  Hit h;
  for (size_t k = 0; k < caps.size(); ++k) {
    if (!boxes[k].contains(u, v)) continue;
    if (const auto t = intersect(caps[k], Vec3::Zero(), dir); t && *t < h.t) {
      h.t = *t;
      h.capsule = static_cast<int>(k);
    }
  }
  return h;
}

// Periodic value noise over a 256 x 256 lattice.
class LatticeNoise {
 public:
  explicit LatticeNoise(uint32_t seed) : table_(256 * 256) {
    for (int j = 0; j < 256; ++j)
      for (int i = 0; i < 256; ++i) table_[j * 256 + i] = static_cast<float>(lattice(i, j, seed));
  }

  double operator()(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const int i = static_cast<int>(static_cast<int64_t>(fx) & 255), j = static_cast<int>(static_cast<int64_t>(fy) & 255);
    const int i1 = (i + 1) & 255, j1 = (j + 1) & 255;
    const double u = smooth(x - fx), v = smooth(y - fy);
    const double a = table_[j * 256 + i], b = table_[j * 256 + i1];
    const double c = table_[j1 * 256 + i], d = table_[j1 * 256 + i1];
    return (a * (1 - u) + b * u) * (1 - v) + (c * (1 - u) + d * u) * v;
  }

 private:
  std::vector<float> table_;
};

struct Shader {
  const std::vector<Capsule>& caps;
  const Scene& scene;
  Vec3 plane_n;  // background plane n.x = d in camera coordinates
  double plane_d;
  geom::RigidTransform cam_to_i;
  LatticeNoise tissue;

  double background(const Vec3& dir) const {
    const double den = plane_n.dot(dir);
    if (den <= 1e-9) return 100.0;
    const Vec3 p = cam_to_i * ((plane_d / den) * dir);
    const double s = 1.0 / 0.004;
    return 100.0 + 14.0 * (tissue(p.x() * s, p.y() * s) - 0.5) + 6.0 * (tissue(p.x() * 3 * s + 97.0, p.y() * 3 * s) - 0.5);
  }

  double instrument(const Hit& h, const Vec3& dir) const {
    const Capsule& c = caps[h.capsule];
    const Vec3 p = h.t * dir;
    const Vec3 ba = c.b - c.a;
    const double len2 = ba.squaredNorm();
    const double s = len2 > 0 ? std::clamp((p - c.a).dot(ba) / len2, 0.0, 1.0) : 0.0;
    const Vec3 n = (p - (c.a + s * ba)).normalized();
    const double lambert = std::max(0.0, -n.dot(dir.normalized()));
    // Surface pattern fixed to the instrument: axial distance from the distal end and angle about the axis.
    const Vec3 axis = len2 > 0 ? Vec3(ba / std::sqrt(len2)) : Vec3::UnitZ();
    Vec3 ref = axis.cross(Vec3::UnitY());
    if (ref.norm() < 1e-6) ref = axis.cross(Vec3::UnitX());
    ref.normalize();
    const double ang = std::atan2(n.dot(axis.cross(ref)), n.dot(ref));
    const double axial = (c.b - p).dot(axis) / 0.0015;
    const uint32_t seed = 977u * static_cast<uint32_t>(c.instrument + 1) + static_cast<uint32_t>(h.capsule);
    const double tex = noise2(axial, (ang + M_PI) * 1.2, seed);
    const bool jaw = c.radius < scene.instruments[c.instrument].radius;
    const double albedo = jaw ? 150.0 + 90.0 * tex : 40.0 + 140.0 * tex;
    return albedo * (0.3 + 0.7 * lambert);
  }
};

// A pixel deep inside one footprint can still straddle the silhouette of another.
bool edge_near(const std::vector<Footprint>& boxes, double u, double v) {
  for (const auto& b : boxes)
    if (b.classify(u, v) == 1) return true;
  return false;
}

void render_view(const Scene& scene, const geom::RigidTransform& camera, const geom::CameraIntrinsics& in,
                 const tiplocate::ProcessingGeometry& geo, const std::vector<tiplocate::PixelRect>& regions,
                 tiplocate::GrayImage* image, tiplocate::BinaryMask* mask, Exec exec) {
  const auto caps = camera_capsules(scene, camera);
  std::vector<Footprint> boxes;
  for (const auto& c : caps) boxes.push_back(bound(c, in));
  const Vec2 centre = in.content_center();
  const double radius = in.content_radius();
  auto ray = [&](double u, double v) { return Vec3((u - in.cx) / in.fx, (v - in.cy) / in.fy, 1.0); };

  if (mask) {
    *mask = tiplocate::BinaryMask(geo.proc_size, geo.proc_size);
    const int n = geo.proc_size;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec2 p = geo.to_full(Vec2(i, j));
        if ((p - centre).squaredNorm() > radius * radius) continue;
        if (trace(caps, boxes, p.x(), p.y(), ray(p.x(), p.y())).capsule >= 0) mask->at(i, j) = 1;
      }
  }

  if (image) {
    *image = tiplocate::GrayImage(in.width, in.height);
    const geom::RigidTransform inv = camera.inverse();
    // Background plane z_i = tissue_depth seen from the camera.
    const Vec3 n_c = inv.rotation * Vec3::UnitZ();
    const double d_c = scene.tissue_depth - Vec3::UnitZ().dot(camera.translation);
    const Shader sh{caps, scene, n_c, d_c, camera, LatticeNoise(scene.texture_seed)};
    static constexpr std::array<std::array<double, 2>, 4> kSub = {{{-0.25, -0.25}, {0.25, -0.25}, {-0.25, 0.25}, {0.25, 0.25}}};
    const int w = in.width, hgt = in.height;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (int v = 0; v < hgt; ++v) {
      int u0 = 0, u1 = w - 1;
      if (!regions.empty()) {
        u0 = w;
        u1 = -1;
        for (const auto& r : regions)
          if (v >= r.y0 && v <= r.y1) {
            u0 = std::min(u0, std::max(r.x0, 0));
            u1 = std::max(u1, std::min(r.x1, w - 1));
          }
      }
      for (int u = u0; u <= u1; ++u) {
        if ((Vec2(u, v) - centre).squaredNorm() > radius * radius) continue;
        if (!regions.empty() &&
            std::none_of(regions.begin(), regions.end(), [&](const auto& r) { return r.contains(u, v); }))
          continue;
        int cls = 0;
        for (const auto& b : boxes) cls = std::max(cls, b.classify(u, v));
        double value = 0;
        if (cls == 0) {
          value = sh.background(ray(u, v));
        } else if (cls == 2 && !edge_near(boxes, u, v)) {
          const Vec3 d = ray(u, v);
          const Hit h = trace(caps, boxes, u, v, d);
          value = h.capsule >= 0 ? sh.instrument(h, d) : sh.background(d);
        } else {
          for (const auto& o : kSub) {
            const double uu = u + o[0], vv = v + o[1];
            const Vec3 d = ray(uu, vv);
            const Hit h = trace(caps, boxes, uu, vv, d);
            value += 0.25 * (h.capsule >= 0 ? sh.instrument(h, d) : sh.background(d));
          }
        }
        image->at(u, v) = static_cast<uint8_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
  }
}

}  // namespace

std::vector<Capsule> camera_capsules(const Scene& scene, const geom::RigidTransform& camera) {
  const geom::RigidTransform inv = camera.inverse();
  std::vector<Capsule> out;
  for (size_t i = 0; i < scene.instruments.size(); ++i)
    for (auto c : scene.instruments[i].capsules(static_cast<int>(i))) {
      c.a = inv * c.a;
      c.b = inv * c.b;
      out.push_back(c);
    }
  return out;
}

std::vector<TipTruth> tip_truth(const Scene& scene, const geom::RigidTransform& camera,
                                const geom::CameraIntrinsics& in) {
  const geom::RigidTransform inv = camera.inverse();
  const auto caps = camera_capsules(scene, camera);
  std::vector<TipTruth> out;
  for (size_t i = 0; i < scene.instruments.size(); ++i) {
    const auto& ins = scene.instruments[i];
    for (const auto& p : ins.tip_points()) {
      TipTruth t;
      t.side = ins.side;
      t.instrument = static_cast<int>(i);
      t.p_c = inv * p;
      if (t.p_c.z() > kNear) {
        t.pixel = in.project(t.p_c);
        t.visible = (t.pixel - in.content_center()).norm() <= in.content_radius();
        const double own = 1.0 - ins.radius / t.p_c.norm();
        for (const auto& c : caps) {
          if (c.instrument == t.instrument) continue;
          if (const auto hit = intersect(c, Vec3::Zero(), t.p_c); hit && *hit < own) t.visible = false;
        }
      }
      out.push_back(t);
    }
  }
  return out;
}

StereoFrame render_stereo(const Scene& scene, const geom::RigidTransform& camera_left,
                          const geom::CameraIntrinsics& intr, const RenderOptions& opt, Exec exec) {
  StereoFrame f;
  const auto geo = tiplocate::ProcessingGeometry::for_image(intr.width, intr.height, opt.proc_size);
  const auto camera_right = geom::right_camera(camera_left, intr.baseline);
  render_view(scene, camera_left, intr, geo, opt.regions, opt.intensity ? &f.left : nullptr,
              opt.mask ? &f.mask_left : nullptr, exec);
  if (opt.intensity || opt.right_mask)
    render_view(scene, camera_right, intr, geo, opt.regions, opt.intensity ? &f.right : nullptr,
                opt.right_mask ? &f.mask_right : nullptr, exec);
  f.tips = tip_truth(scene, camera_left, intr);
  return f;
}

}  // namespace endotrack::sim
