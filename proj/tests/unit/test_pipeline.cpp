#include <doctest.h>

#include <cmath>
#include <random>

#include "draw.hpp"
#include "endotrack/error.hpp"
#include "endotrack/tiplocate/pipeline.hpp"

using namespace endotrack;
using namespace endotrack::tiplocate;

TEST_CASE("processing geometry round trip") {
  const auto geo = ProcessingGeometry::for_image(1920, 1080);
  CHECK(geo.crop_x0 == doctest::Approx(420));
  CHECK(geo.crop_size == doctest::Approx(1080));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0, 255);
  for (int i = 0; i < 100; ++i) {
    const Vec2 p(u(rng), u(rng));
    CHECK((geo.to_proc(geo.to_full(p)) - p).norm() < 1e-9);
  }
  // Pixel centres of the raster map to the centre of the image content.
  CHECK((geo.to_full(Vec2(127.5, 127.5)) - Vec2(959.5, 539.5)).norm() < 1e-9);
  const auto tall = ProcessingGeometry::for_image(600, 800);
  CHECK(tall.crop_size == doctest::Approx(600));
  CHECK(tall.crop_y0 == doctest::Approx(100));
}

TEST_CASE("blank mask gives no detections") {
  const auto geo = ProcessingGeometry::for_image(1920, 1080);
  BinaryMask m(256, 256);
  CHECK(detect_instruments(m, geo, {}).empty());
  GrayImage l(1920, 1080), r(1920, 1080);
  const auto fr = localize_frame(m, l, r, geo, {});
  CHECK(fr.detections.empty());
  CHECK(fr.measurements.empty());
  CHECK(fr.rejected == 0);
}

TEST_CASE("single shaft: one detection, side from the entry") {
  const auto geo = ProcessingGeometry::for_image(1920, 1080);
  BinaryMask m(256, 256);
  const Vec2 tip(170, 110);
  draw::capsule(m, draw::rim(256, 330, -20), tip, 5.0);
  const auto ds = detect_instruments(m, geo, {});
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].side == Side::Right);
  REQUIRE(ds[0].tips.size() == 1);
  CHECK((ds[0].tips[0] - geo.to_full(tip)).norm() < 3 * geo.scale());
}

TEST_CASE("two graspers: at most two tips each, ordered LEFT then RIGHT") {
  const auto geo = ProcessingGeometry::for_image(1920, 1080);
  BinaryMask m(256, 256);
  for (double deg : {200.0, 340.0}) {
    const Vec2 e = draw::rim(256, deg, -20);
    const Vec2 base = e + 0.55 * (Vec2(128, 128) - e);
    draw::capsule(m, e, base, 4.5);
    const Vec2 dir = (base - e).normalized();
    const Vec2 nrm(-dir.y(), dir.x());
    draw::capsule(m, base, base + 22 * dir + 7 * nrm, 2.5);
    draw::capsule(m, base, base + 22 * dir - 7 * nrm, 2.5);
  }
  const auto ds = detect_instruments(m, geo, {});
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].side == Side::Left);
  CHECK(ds[1].side == Side::Right);
  CHECK(ds[0].entry.x() < ds[1].entry.x());
  for (const auto& d : ds) {
    CHECK(d.tips.size() >= 1);
    CHECK(d.tips.size() <= 2);
  }
}

TEST_CASE("localize_frame measures disparity at each tip") {
  const auto geo = ProcessingGeometry::for_image(640, 360);
  BinaryMask m(256, 256);
  const Vec2 tip(100, 140);
  draw::capsule(m, draw::rim(256, 190, -20), tip, 5.0);
  const double d = 18;
  GrayImage l(640, 360), r(640, 360);
  for (int y = 0; y < 360; ++y)
    for (int x = 0; x < 640; ++x) {
      auto tex = [&](double xx) { return 127 + 50 * std::sin(0.21 * xx + 0.13 * y) * std::cos(0.07 * xx - 0.17 * y); };
      l.at(x, y) = static_cast<uint8_t>(std::lround(tex(x)));
      r.at(x, y) = static_cast<uint8_t>(std::lround(tex(x + d)));
    }
  const auto fr = localize_frame(m, l, r, geo, {}, 1.5);
  REQUIRE(fr.measurements.size() == 1);
  CHECK(fr.measurements[0].side == Side::Left);
  CHECK(std::abs(fr.measurements[0].observation.d_x - d) < 0.3);
  CHECK(fr.measurements[0].observation.timestamp == 1.5);
  const Vec2 full = geo.to_full(tip);
  CHECK(std::abs(fr.measurements[0].observation.u_l - full.x()) < 3 * geo.scale());
}

TEST_CASE("localizer config validation") {
  LocalizerConfig c;
  CHECK_NOTHROW(c.validate());
  c.band_inner = 1.2;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.stereo.window = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
