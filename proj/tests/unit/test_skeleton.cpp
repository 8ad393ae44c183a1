#include <doctest.h>

#include <random>

#include "draw.hpp"
#include "endotrack/tiplocate/skeleton.hpp"

using namespace endotrack;
using namespace endotrack::tiplocate;

namespace {

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && !b.data[i]) return false;
  return true;
}

// 2x2 blocks whose pixels could all be removed without changing topology.
int thick_blocks(const BinaryMask& s) {
  int n = 0;
  for (int y = 0; y + 1 < s.height; ++y)
    for (int x = 0; x + 1 < s.width; ++x) {
      if (!(s.at(x, y) && s.at(x + 1, y) && s.at(x, y + 1) && s.at(x + 1, y + 1))) continue;
      if (is_simple(s, x, y) || is_simple(s, x + 1, y) || is_simple(s, x, y + 1) || is_simple(s, x + 1, y + 1)) ++n;
    }
  return n;
}

int any_blocks(const BinaryMask& s) {
  int n = 0;
  for (int y = 0; y + 1 < s.height; ++y)
    for (int x = 0; x + 1 < s.width; ++x)
      n += s.at(x, y) && s.at(x + 1, y) && s.at(x, y + 1) && s.at(x + 1, y + 1);
  return n;
}

BinaryMask random_scene(std::mt19937& rng, int size) {
  std::uniform_real_distribution<double> u(0, size), r(1.5, 7);
  std::uniform_int_distribution<int> count(1, 4);
  BinaryMask m(size, size);
  const int k = count(rng);
  for (int i = 0; i < k; ++i) draw::capsule(m, {u(rng), u(rng)}, {u(rng), u(rng)}, r(rng));
  // Sprinkle noise so that holes and specks appear.
  std::bernoulli_distribution flip(0.01);
  for (auto& v : m.data)
    if (flip(rng)) v = !v;
  return m;
}

}  // namespace

TEST_CASE("empty mask gives an empty skeleton") {
  BinaryMask m(32, 32);
  CHECK(count_true(skeletonize(m)) == 0);
}

TEST_CASE("a 9-pixel horizontal bar thins to its centre row") {
  BinaryMask m(60, 21);
  for (int y = 6; y < 15; ++y)
    for (int x = 5; x < 55; ++x) m.at(x, y) = 1;
  const BinaryMask s = skeletonize(m);
  int on_centre = 0, off_centre = 0;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (s.at(x, y)) (y == 10 ? on_centre : off_centre)++;
  CHECK(off_centre == 0);
  CHECK(on_centre >= 40);
  CHECK(count_components(s) == 1);
}

TEST_CASE("a diagonal shaft thins to within 2 px of its axis") {
  const Vec2 a(20, 30), b(200, 170);
  BinaryMask m(256, 256);
  draw::capsule(m, a, b, 5.0, false);
  const BinaryMask s = skeletonize(m);
  CHECK(count_true(s) > 150);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (s.at(x, y)) CHECK(draw::segment_distance(Vec2(x, y), a, b) <= 2.0);
  CHECK(any_blocks(s) == 0);
}

TEST_CASE("skeleton is a thin, topology-preserving subset on random scenes") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const BinaryMask m = random_scene(rng, 96);
    const BinaryMask s = skeletonize(m, Exec::Serial);
    CHECK(subset(s, m));
    CHECK(count_components(s) == count_components(m));
    CHECK(thick_blocks(s) == 0);
    // Every surviving pixel is an endpoint or topologically necessary.
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        if (s.at(x, y) && neighbour_count(s, x, y) >= 2 && is_simple(s, x, y)) {
          // Simple pixels may remain only where no border direction applies.
          const bool border = !s.get(x, y - 1) || !s.get(x, y + 1) || !s.get(x - 1, y) || !s.get(x + 1, y);
          CHECK_FALSE(border);
        }
  }
}

TEST_CASE("capsule scenes thin without any 2x2 block") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> ang(0, 360), r(2.5, 6);
  for (int trial = 0; trial < 40; ++trial) {
    BinaryMask m(256, 256);
    draw::capsule(m, draw::rim(256, ang(rng), -10), {128 + 40 * std::cos(trial), 128 + 40 * std::sin(trial)}, r(rng));
    CHECK(any_blocks(skeletonize(m)) == 0);
  }
}

TEST_CASE("parallel and serial thinning agree") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask m = random_scene(rng, 128);
    CHECK(skeletonize(m, Exec::Parallel) == skeletonize(m, Exec::Serial));
  }
}

TEST_CASE("simple-point test") {
  BinaryMask m(5, 5);
  m.at(2, 2) = 1;
  CHECK_FALSE(is_simple(m, 2, 2));  // isolated
  m.at(1, 2) = 1;
  CHECK(is_simple(m, 2, 2));  // endpoint
  m.at(3, 2) = 1;
  CHECK_FALSE(is_simple(m, 2, 2));  // bridge
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) m.at(x, y) = 1;
  CHECK_FALSE(is_simple(m, 2, 2));  // interior
  CHECK(is_simple(m, 1, 1));        // corner
}
