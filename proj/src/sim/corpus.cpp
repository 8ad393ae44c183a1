#include "endotrack/sim/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>

#include "endotrack/error.hpp"
#include "endotrack/sim/scene.hpp"

namespace endotrack::sim {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

enum class Kind { Crossing, HiddenLeaf, Single, Pair };

Kind kind_of(int i) {
  switch (i % 10) {
    case 0: return Kind::Crossing;
    case 1: return Kind::HiddenLeaf;
    case 2: case 3: case 4: return Kind::Single;
    default: return Kind::Pair;
  }
}

class FrameSampler {
 public:
  FrameSampler(const geom::CameraIntrinsics& in, unsigned seed) : in_(in), rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }

  // Point at image offset (u, v), in content radii from the centre, and depth z.
  Vec3 at_view(double u, double v, double z) const {
    const double k = in_.content_radius() / in_.fx;
    return {u * k * z, v * k * z, z};
  }

  Instrument instrument(Side side, const Vec3& tip, bool allow_jaws) {
    Instrument ins;
    ins.side = side;
    const double phi = side == Side::Left ? uniform(0.75 * kPi, 1.25 * kPi) : uniform(-0.25 * kPi, 0.25 * kPi);
    ins.pivot = Vec3(0.09 * std::cos(phi), 0.09 * std::sin(phi), uniform(0.01, 0.03));
    ins.tip = tip;
    ins.radius = uniform(0.002, 0.003);
    if (allow_jaws && uniform(0, 1) < 0.4) {
      ins.jaw_length = uniform(0.007, 0.011);
      ins.jaw_opening = uniform(12, 28) * kPi / 180.0;
    }
    return ins;
  }

  Vec3 free_tip(double u0, double u1) {
    for (;;) {
      const double u = uniform(u0, u1), v = uniform(-0.55, 0.55);
      if (std::hypot(u, v) <= 0.6) return at_view(u, v, uniform(0.06, 0.12));
    }
  }

  Scene sample(Kind kind) {
    Scene s;
    switch (kind) {
      case Kind::Single: {
        const Side side = uniform(0, 1) < 0.5 ? Side::Left : Side::Right;
        s.instruments.push_back(instrument(side, free_tip(-0.55, 0.55), true));
        break;
      }
      case Kind::Pair:
        s.instruments.push_back(instrument(Side::Left, free_tip(-0.55, 0.05), true));
        s.instruments.push_back(instrument(Side::Right, free_tip(-0.05, 0.55), true));
        break;
      case Kind::Crossing:
        s.instruments.push_back(instrument(
            Side::Left, at_view(uniform(0.15, 0.5), uniform(-0.3, 0.3), uniform(0.06, 0.11)), true));
        s.instruments.push_back(instrument(
            Side::Right, at_view(uniform(-0.5, -0.15), uniform(-0.3, 0.3), uniform(0.06, 0.11)), true));
        break;
      case Kind::HiddenLeaf: {
        Instrument base = instrument(Side::Right, free_tip(-0.2, 0.4), false);
        const Vec3 q = base.tip - uniform(0.015, 0.03) * base.axis();
        const Vec3 tip = q - (base.radius + 0.0005) * q.normalized();
        const Vec2 along = (in_.project(base.tip) - in_.project(q)).normalized();
        Instrument rest;
        // The resting shaft meets the other one side-on, away from its distal end.
        for (int k = 0; k < 50; ++k) {
          rest = instrument(Side::Left, tip, false);
          const Vec2 back = (in_.project(tip + 0.01 * (rest.pivot - tip).normalized()) - in_.project(tip)).normalized();
          if (std::abs(back.dot(along)) < 0.6) break;
        }
        s.instruments = {rest, base};
        break;
      }
    }
    return s;
  }

 private:
  const geom::CameraIntrinsics& in_;
  std::mt19937 rng_;
};

struct Seg2 {
  Vec2 a, b;
};

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::optional<Vec2> intersection(const Seg2& p, const Seg2& q) {
  const Vec2 r = p.b - p.a, s = q.b - q.a;
  const double den = cross2(r, s);
  if (std::abs(den) < 1e-12) return std::nullopt;
  const double t = cross2(q.a - p.a, s) / den, u = cross2(q.a - p.a, r) / den;
  if (t < 0 || t > 1 || u < 0 || u > 1) return std::nullopt;
  return p.a + t * r;
}

double distance_to(const Seg2& s, const Vec2& p) {
  const Vec2 d = s.b - s.a;
  const double t = std::clamp((p - s.a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (s.a + t * d - p).norm();
}

// Image of a shaft, from its distal end back to where it is 1 cm deep.
Seg2 shaft_image(const Instrument& ins, const geom::CameraIntrinsics& in) {
  const Vec3 d = ins.tip - ins.pivot;
  const double t = std::clamp((0.01 - ins.pivot.z()) / d.z(), 0.0, 1.0);
  return {in.project(ins.tip), in.project(ins.pivot + t * d)};
}

std::vector<std::string> tags_of(const Scene& s, const std::vector<TipTruth>& tips, const geom::CameraIntrinsics& in) {
  std::vector<std::string> tags;
  if (s.instruments.size() < 2) return tags;
  const Seg2 a = shaft_image(s.instruments[0], in), b = shaft_image(s.instruments[1], in);
  if (auto x = intersection(a, b); x && (*x - in.content_center()).norm() < in.content_radius())
    tags.push_back("crossing");
  for (const auto& t : tips) {
    if (!t.visible) continue;
    const auto& other = s.instruments[1 - t.instrument];
    const Seg2& seg = t.instrument == 0 ? b : a;
    const double r_px = in.fx * other.radius / t.p_c.z();
    if (distance_to(seg, t.pixel) < r_px + 3.0) {
      tags.push_back("hidden_leaf");
      break;
    }
  }
  return tags;
}

bool has(const std::vector<std::string>& tags, const char* tag) {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

}  // namespace

tiplocate::CorpusManifest make_corpus(const std::string& dir, const CorpusOptions& opt, Exec exec) {
  if (opt.frames <= 0) throw Error(Errc::ConfigInvalid, "corpus needs at least one frame");
  const auto in = geom::CameraIntrinsics::from_fov(opt.width, opt.height, opt.fov, opt.baseline);
  in.validate();
  fs::create_directories(fs::path(dir) / "masks");
  if (opt.intensity) fs::create_directories(fs::path(dir) / "images");

  tiplocate::CorpusManifest m;
  m.base_dir = dir;
  m.image_width = opt.width;
  m.image_height = opt.height;
  m.box_side = 200.0 * opt.height / 1080.0;
  m.frames.resize(opt.frames);

  RenderOptions ro;
  ro.intensity = opt.intensity;
  ro.proc_size = opt.proc_size;

  auto one = [&](int i) {
    FrameSampler sampler(in, opt.seed * 1000003u + static_cast<unsigned>(i));
    const Kind kind = kind_of(i);
    Scene scene;
    std::vector<TipTruth> tips;
    std::vector<std::string> tags;
    for (int attempt = 0; attempt < 200; ++attempt) {
      scene = sampler.sample(kind);
      tips = tip_truth(scene, geom::RigidTransform::identity(), in);
      tags = tags_of(scene, tips, in);
      const bool ok = kind == Kind::Crossing     ? has(tags, "crossing")
                      : kind == Kind::HiddenLeaf ? has(tags, "hidden_leaf") && !has(tags, "crossing")
                                                 : true;
      if (ok) break;
    }
    const StereoFrame f = render_stereo(scene, geom::RigidTransform::identity(), in, ro, Exec::Serial);
    char name[64];
    auto& cf = m.frames[i];
    std::snprintf(name, sizeof name, "frame_%03d.pgm", i);
    cf.mask = (fs::path(dir) / "masks" / name).string();
    tiplocate::write_mask(cf.mask, f.mask_left);
    if (opt.intensity) {
      std::snprintf(name, sizeof name, "left_%03d.pgm", i);
      cf.left = (fs::path(dir) / "images" / name).string();
      tiplocate::write_pgm(cf.left, f.left);
      std::snprintf(name, sizeof name, "right_%03d.pgm", i);
      cf.right = (fs::path(dir) / "images" / name).string();
      tiplocate::write_pgm(cf.right, f.right);
    }
    for (const auto& t : tips) cf.tips.push_back({t.pixel, t.side, t.visible});
    cf.tags = tags;
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < opt.frames; ++i) one(i);
  } else {
    for (int i = 0; i < opt.frames; ++i) one(i);
  }
  tiplocate::save_manifest((fs::path(dir) / "manifest.json").string(), m);
  return m;
}

}  // namespace endotrack::sim
