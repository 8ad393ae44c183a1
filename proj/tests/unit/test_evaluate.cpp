#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "draw.hpp"
#include "endotrack/error.hpp"
#include "endotrack/tiplocate/evaluate.hpp"

using namespace endotrack;
using namespace endotrack::tiplocate;
namespace fs = std::filesystem;

namespace {

double brute_force(const std::vector<std::vector<double>>& c) {
  const size_t n = c.size(), m = c[0].size();
  std::vector<int> cols(std::max(n, m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 1e300;
  do {
    double s = 0;
    for (size_t i = 0; i < n; ++i)
      if (cols[i] < static_cast<int>(m)) s += c[i][cols[i]];
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

Errc code_of(const std::string& path) {
  try {
    load_manifest(path);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

std::string what_of(const std::string& path) {
  try {
    load_manifest(path);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("box IoU") {
  CHECK(iou({{0, 0}, 10}, {{0, 0}, 10}) == doctest::Approx(1.0));
  CHECK(iou({{0, 0}, 10}, {{5, 0}, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou({{0, 0}, 10}, {{10, 0}, 10}) == doctest::Approx(0.0));
  CHECK(iou({{0, 0}, 10}, {{5, 5}, 10}) == doctest::Approx(25.0 / 175.0));
}

TEST_CASE("Hungarian matches brute force") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> sz(1, 5);
  for (int t = 0; t < 300; ++t) {
    const int n = sz(rng), m = sz(rng);
    std::vector<std::vector<double>> c(n, std::vector<double>(m));
    for (auto& row : c)
      for (auto& v : row) v = u(rng);
    const auto a = hungarian(c);
    REQUIRE(a.size() == static_cast<size_t>(n));
    double s = 0;
    std::vector<int> used;
    for (int i = 0; i < n; ++i)
      if (a[i] >= 0) {
        s += c[i][a[i]];
        used.push_back(a[i]);
      }
    CHECK(static_cast<int>(used.size()) == std::min(n, m));
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(s == doctest::Approx(brute_force(c)));
  }
}

TEST_CASE("tip matching counts") {
  const double box = 200;
  auto c = match_tips({{100, 100}, {500, 500}}, {{110, 90}, {900, 900}}, box);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  c = match_tips({}, {{1, 1}}, box);
  CHECK(c.fp == 1);
  c = match_tips({{1, 1}}, {}, box);
  CHECK(c.fn == 1);
  // Offset of 1/3 box side gives IoU exactly 0.5.
  c = match_tips({{0, 0}}, {{box / 3.0 - 1e-9, 0}}, box);
  CHECK(c.tp == 1);
  c = match_tips({{0, 0}}, {{box / 3.0 + 1e-6, 0}}, box);
  CHECK(c.tp == 0);
}

TEST_CASE("metrics aggregation") {
  DetectionMetrics m;
  m.add({0, 0, 0}, false);
  m.add({0, 0, 2}, true);
  m.finish();
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.at_least_one_rate == 0.0);
  DetectionMetrics k;
  k.add({1, 1, 0}, true);
  k.add({2, 0, 1}, true);
  k.add({0, 1, 0}, false);
  k.finish();
  CHECK(k.precision == doctest::Approx(3.0 / 5.0));
  CHECK(k.recall == doctest::Approx(3.0 / 4.0));
  CHECK(k.at_least_one_rate == doctest::Approx(1.0));
  CHECK(k.frames == 3);
}

TEST_CASE("manifest round trip and evaluation") {
  const fs::path dir = fs::temp_directory_path() / "endotrack_manifest_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "masks");
  CorpusManifest m;
  m.image_width = 1920;
  m.image_height = 1080;
  m.box_side = 200;
  const auto geo = ProcessingGeometry::for_image(1920, 1080);
  for (int i = 0; i < 4; ++i) {
    BinaryMask mask(256, 256);
    const Vec2 tip(90 + 20 * i, 120);
    draw::capsule(mask, draw::rim(256, 200 + 10 * i, -20), tip, 5);
    const std::string name = "masks/f" + std::to_string(i) + ".pgm";
    write_mask((dir / name).string(), mask);
    CorpusFrame f;
    f.mask = (dir / name).string();
    f.tips.push_back({geo.to_full(tip), Side::Left, true});
    if (i == 3) f.tags = {"crossing"};
    m.frames.push_back(f);
  }
  save_manifest((dir / "manifest.json").string(), m);
  const auto back = load_manifest((dir / "manifest.json").string());
  REQUIRE(back.frames.size() == 4);
  CHECK(back.frames[3].tags == std::vector<std::string>{"crossing"});
  CHECK((back.frames[1].tips[0].p - m.frames[1].tips[0].p).norm() < 1e-9);
  CHECK(fs::path(back.frames[0].mask) == fs::path(m.frames[0].mask));

  const auto par = evaluate_corpus(back, {}, Exec::Parallel);
  const auto ser = evaluate_corpus(back, {}, Exec::Serial);
  CHECK(par.tp == 4);
  CHECK(par.precision == doctest::Approx(1.0));
  CHECK(par.recall == doctest::Approx(1.0));
  CHECK(ser.tp == par.tp);
  CHECK(ser.fp == par.fp);
  fs::remove_all(dir);
}

TEST_CASE("invalid manifests name the offending key") {
  const fs::path dir = fs::temp_directory_path() / "endotrack_manifest_bad";
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream((dir / name).string()) << text;
    return (dir / name).string();
  };
  const auto missing = write("a.json", R"({"image_width":1920,"image_height":1080,"frames":[{"mask":"m.pgm","tips":[{"y":3,"side":"LEFT"}]}]})");
  CHECK(code_of(missing) == Errc::ManifestInvalid);
  CHECK(what_of(missing).find("frames[0].tips[0].x") != std::string::npos);
  const auto badside = write("b.json", R"({"image_width":1920,"image_height":1080,"frames":[{"mask":"m.pgm","tips":[{"x":1,"y":3,"side":"UP"}]}]})");
  CHECK(code_of(badside) == Errc::ManifestInvalid);
  CHECK(code_of(write("c.json", "{not json")) == Errc::ManifestInvalid);
  CHECK(code_of(write("d.json", R"({"image_width":"wide","image_height":1080,"frames":[]})")) == Errc::ManifestInvalid);
  CHECK(code_of((dir / "none.json").string()) == Errc::ManifestInvalid);
  fs::remove_all(dir);
}
