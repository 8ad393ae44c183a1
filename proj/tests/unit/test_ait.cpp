#include <doctest.h>

#include <random>
#include <set>

#include "endotrack/ait.hpp"
#include "endotrack/error.hpp"

using namespace endotrack;
using namespace endotrack::ait;

namespace {

const geom::CameraIntrinsics kIntr = geom::CameraIntrinsics::from_fov(960, 540, 2.0943951023931953, 0.0016);

// Camera-frame point whose projection sits at radial fraction r along +x.
Vec3 at_fraction(double r, double z = 0.08) {
  const double px = r * kIntr.content_radius();
  return {px * z / kIntr.fx, 0.0, z};
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

}  // namespace

TEST_CASE("virtual tip examples") {
  const Vec3 l(-0.01, 0, 0.08), r(0.01, 0, 0.08);
  CHECK((virtual_tip(l, r, 0.5) - Vec3(0, 0, 0.08)).norm() < 1e-15);
  CHECK(virtual_tip(l, r, 1.0) == r);
  const Vec3 a(0.003, -0.02, 0.07), b(-0.01, 0.005, 0.11);
  const Vec3 v = virtual_tip(a, b, 0.25);
  for (int i = 0; i < 3; ++i) CHECK(v[i] == doctest::Approx(0.75 * a[i] + 0.25 * b[i]));
  CHECK(virtual_tip(std::nullopt, r, 0.2) == r);
  CHECK(virtual_tip(l, std::nullopt, 0.9) == l);
  CHECK(code_of([] { virtual_tip(std::nullopt, std::nullopt, 0.5); }) == Errc::NoTips);
  CHECK(code_of([&] { virtual_tip(l, r, 1.01); }) == Errc::InvalidWeight);
  CHECK(code_of([&] { virtual_tip(l, r, -0.1); }) == Errc::InvalidWeight);
}

TEST_CASE("virtual tip is a convex combination") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-0.05, 0.05), w(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a(u(rng), u(rng), 0.08 + u(rng)), b(u(rng), u(rng), 0.08 + u(rng));
    const double wd = w(rng);
    const Vec3 v = virtual_tip(a, b, wd);
    const double t = (v - a).dot(b - a) / (b - a).squaredNorm();
    CHECK(t >= -1e-12);
    CHECK(t <= 1 + 1e-12);
    CHECK((a + t * (b - a) - v).norm() < 1e-12);
  }
}

TEST_CASE("zone classification examples") {
  AitConfig cfg;
  CHECK(classify_zone(at_fraction(0.30), kIntr, cfg) == ZonePair{Zone::A, Zone::A});
  CHECK(classify_zone(at_fraction(0.50), kIntr, cfg).image == Zone::B);
  CHECK(classify_zone(at_fraction(0.70), kIntr, cfg).image == Zone::C);
  CHECK(classify_zone(Vec3(0, 0, 0.14), kIntr, cfg).depth == Zone::C);
  CHECK(classify_zone(Vec3(0, 0, 0.12), kIntr, cfg).depth == Zone::B);
  CHECK(classify_zone(Vec3(0, 0, 0.06), kIntr, cfg).depth == Zone::A);
  CHECK(radial_fraction(at_fraction(0.37), kIntr) == doctest::Approx(0.37));
  CHECK(classify_zone(Vec3(0, 0, -0.01), kIntr, cfg).image == Zone::C);
}

TEST_CASE("zone classification is monotone") {
  AitConfig cfg;
  int prev = 0;
  for (double r = 0; r < 1.2; r += 0.001) {
    const int z = static_cast<int>(image_zone(r, cfg));
    CHECK(z >= prev);
    prev = z;
  }
  prev = 0;
  for (double e = 0; e < 0.1; e += 0.0001) {
    const int z = static_cast<int>(depth_zone(0.08 + e, 0.08, cfg));
    CHECK(z == static_cast<int>(depth_zone(0.08 - e, 0.08, cfg)));
    CHECK(z >= prev);
    prev = z;
  }
}

TEST_CASE("supervisor step examples") {
  AitConfig cfg;
  AitState st = AitState::initial(cfg);
  auto s = step(st, {at_fraction(0.2), std::nullopt}, 0.1, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  CHECK(s.command.kind == CommandKind::Hold);

  s = step(st, {at_fraction(0.5), std::nullopt}, 0.2, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  s = step(st, {at_fraction(0.7), std::nullopt}, 0.3, cfg, kIntr);
  CHECK(st.mode == Mode::Tracking);
  CHECK(s.command.kind == CommandKind::ServoTo);
  CHECK(s.command.s_star == Vec3(0, 0, 0.08));
  REQUIRE(s.event);
  CHECK(s.event->from == Mode::Holding);
  CHECK(s.event->to == Mode::Tracking);

  s = step(st, {at_fraction(0.5), std::nullopt}, 0.4, cfg, kIntr);
  CHECK(st.mode == Mode::Tracking);
  CHECK(s.command.kind == CommandKind::ServoTo);
  s = step(st, {at_fraction(0.3, 0.12), std::nullopt}, 0.5, cfg, kIntr);
  CHECK(st.mode == Mode::Tracking);
  s = step(st, {at_fraction(0.3), std::nullopt}, 0.6, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  CHECK(s.command.kind == CommandKind::Hold);
}

TEST_CASE("depth violation alone activates tracking") {
  AitConfig cfg;
  AitState st = AitState::initial(cfg);
  step(st, {Vec3(0, 0, 0.10), std::nullopt}, 0.1, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  step(st, {Vec3(0, 0, 0.135), std::nullopt}, 0.2, cfg, kIntr);
  CHECK(st.mode == Mode::Tracking);
}

TEST_CASE("lost tips fall back and only reset leaves fallback") {
  AitConfig cfg;
  AitState st = AitState::initial(cfg);
  step(st, {at_fraction(0.1), std::nullopt}, 0.0, cfg, kIntr);
  auto s = step(st, {}, 9.9, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  s = step(st, {}, 10.05, cfg, kIntr);
  CHECK(st.mode == Mode::Fallback);
  CHECK(s.command.kind == CommandKind::EnterFallback);
  s = step(st, {at_fraction(0.8), std::nullopt}, 11, cfg, kIntr);
  CHECK(st.mode == Mode::Fallback);
  CHECK(s.command.kind == CommandKind::Hold);
  apply_instruction(st, {InstructionKind::TrackLeft, 0});
  CHECK(st.mode == Mode::Fallback);
  apply_instruction(st, {InstructionKind::ResetFromFallback, 0});
  CHECK(st.mode == Mode::Holding);
  step(st, {at_fraction(0.1), std::nullopt}, 11.1, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
}

TEST_CASE("instructions") {
  AitConfig cfg;
  AitState st = AitState::initial(cfg);
  apply_instruction(st, {InstructionKind::TrackRight, 0});
  const Vec3 l(-0.02, 0.01, 0.08), r(0.004, 0, 0.09);
  auto s = step(st, {l, r}, 0.1, cfg, kIntr);
  REQUIRE(s.target);
  CHECK(*s.target == r);
  CHECK(virtual_tip(l, r, st.w_d) == r);
  apply_instruction(st, {InstructionKind::TrackLeft, 0});
  s = step(st, {l, r}, 0.2, cfg, kIntr);
  CHECK(*s.target == l);

  apply_instruction(st, {InstructionKind::SetZoom, 0.10});
  s = step(st, {at_fraction(0.8, 0.10), std::nullopt}, 0.3, cfg, kIntr);
  CHECK(s.command.kind == CommandKind::ServoTo);
  CHECK(s.command.s_star == Vec3(0, 0, 0.10));

  apply_instruction(st, {InstructionKind::Disable, 0});
  CHECK(st.mode == Mode::Holding);
  s = step(st, {at_fraction(0.9), std::nullopt}, 0.4, cfg, kIntr);
  CHECK(st.mode == Mode::Holding);
  CHECK(s.command.kind == CommandKind::Hold);

  CHECK(code_of([&] { apply_instruction(st, {InstructionKind::TrackWeighted, 1.5}); }) == Errc::InvalidWeight);
  CHECK(code_of([&] { apply_instruction(st, {InstructionKind::SetZoom, 0}); }) == Errc::ConfigInvalid);
  CHECK(instruction_kind_from_string("SET_ZOOM") == InstructionKind::SetZoom);
  CHECK(code_of([] { instruction_kind_from_string("JUMP"); }) == Errc::ConfigInvalid);
}

TEST_CASE("config invariants") {
  AitConfig c;
  CHECK_NOTHROW(c.validate());
  c.zone_c = 0.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.depth_target = 0.06;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.w_d = 2;
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidWeight);
}

TEST_CASE("no servo command while the target stays in zones A and B") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> rr(0, 0.5999), dz(-0.0499, 0.0499);
  std::bernoulli_distribution two(0.5);
  AitConfig cfg;
  for (int run = 0; run < 50; ++run) {
    AitState st = AitState::initial(cfg);
    for (int k = 0; k < 400; ++k) {
      const Vec3 s = at_fraction(rr(rng), 0.08 + dz(rng));
      const auto out = step(st, {s, std::nullopt}, 0.01 * k, cfg, kIntr);
      CHECK(out.command.kind == CommandKind::Hold);
      CHECK(st.mode == Mode::Holding);
    }
  }
}

TEST_CASE("mode transitions stay within the allowed graph") {
  const std::set<std::pair<Mode, Mode>> allowed = {{Mode::Holding, Mode::Tracking},
                                                   {Mode::Tracking, Mode::Holding},
                                                   {Mode::Holding, Mode::Fallback},
                                                   {Mode::Tracking, Mode::Fallback},
                                                   {Mode::Fallback, Mode::Holding}};
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> rr(0, 1.1), dz(-0.08, 0.08), u(0, 1);
  std::uniform_int_distribution<int> ins(0, 5);
  AitConfig cfg;
  cfg.lost_timeout = 0.5;
  std::set<std::pair<Mode, Mode>> seen;
  for (int run = 0; run < 40; ++run) {
    AitState st = AitState::initial(cfg);
    double t = 0;
    int absent = 0;
    for (int k = 0; k < 2000; ++k) {
      t += 0.05;
      const Mode before = st.mode;
      if (u(rng) < 0.02) {
        const auto kind = static_cast<InstructionKind>(ins(rng));
        apply_instruction(st, {kind, kind == InstructionKind::SetZoom ? 0.06 + 0.04 * u(rng) : u(rng)});
      } else {
        TipPair tips;
        if (u(rng) > 0.3) tips.left = at_fraction(rr(rng), 0.08 + dz(rng));
        if (u(rng) > 0.3) tips.right = at_fraction(rr(rng), 0.08 + dz(rng));
        if (absent == 0 && u(rng) < 0.01) absent = 5 + static_cast<int>(20 * u(rng));
        if (absent > 0) {
          tips = {};
          --absent;
        }
        step(st, tips, t, cfg, kIntr);
      }
      if (st.mode != before) {
        const auto edge = std::make_pair(before, st.mode);
        CHECK(allowed.count(edge) == 1);
        seen.insert(edge);
      }
    }
  }
  CHECK(seen.size() == allowed.size());
}
