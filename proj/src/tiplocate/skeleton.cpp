#include "endotrack/tiplocate/skeleton.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace endotrack::tiplocate {

namespace {

// Neighbours in the order x1..x8 used by the crossing-number formula:
// E, NE, N, NW, W, SW, S, SE.
constexpr std::array<int, 8> kDx = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy = {0, -1, -1, -1, 0, 1, 1, 1};

std::array<int, 8> ring(const BinaryMask& m, int x, int y) {
  std::array<int, 8> n{};
  for (int k = 0; k < 8; ++k) n[k] = m.get(x + kDx[k], y + kDy[k]) ? 1 : 0;
  return n;
}

// 8-connectivity number of the complement (Yokoi); 1 exactly for simple
// points that are not interior.
int connectivity_number(const std::array<int, 8>& n) {
  auto c = [&](int k) { return 1 - n[k % 8]; };
  int sum = 0;
  for (int k = 0; k < 8; k += 2) sum += c(k) - c(k) * c(k + 1) * c(k + 2);
  return sum;
}

struct Direction {
  int dx, dy;
};
constexpr std::array<Direction, 4> kDirections = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};

bool deletable(const BinaryMask& m, int x, int y, Direction d) {
  if (!m.at(x, y) || m.get(x + d.dx, y + d.dy)) return false;
  const auto n = ring(m, x, y);
  int count = 0;
  for (int v : n) count += v;
  if (count < 2) return false;
  return connectivity_number(n) == 1;
}

}  // namespace

int neighbour_count(const BinaryMask& m, int x, int y) {
  int c = 0;
  for (int v : ring(m, x, y)) c += v;
  return c;
}

bool is_simple(const BinaryMask& m, int x, int y) {
  const auto n = ring(m, x, y);
  int count = 0;
  for (int v : n) count += v;
  // Isolated points and interior points change the topology when removed.
  if (count == 0) return false;
  return connectivity_number(n) == 1;
}

std::vector<double> squared_distance_transform(const BinaryMask& m, Exec exec) {
  const int w = m.width, h = m.height;
  const double inf = 1e20;
  std::vector<double> d(static_cast<size_t>(w) * h);
  // 1D lower envelope of parabolas (Felzenszwalb and Huttenlocher).
  auto pass = [](const double* f, double* out, int n, int* v, double* z) {
    auto cross = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
    int k = 0;
    v[0] = 0;
    z[0] = -1e300;
    z[1] = 1e300;
    for (int q = 1; q < n; ++q) {
      double s = cross(q, v[k]);
      while (s <= z[k]) s = cross(q, v[--k]);
      v[++k] = q;
      z[k] = s;
      z[k + 1] = 1e300;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      out[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
    }
  };
  // The raster border counts as background, as pixels outside the image do.
  auto columns = [&](int x, std::vector<double>& f, std::vector<double>& o, std::vector<int>& v, std::vector<double>& z) {
    f[0] = 0;
    for (int y = 0; y < h; ++y) f[y + 1] = m.at(x, y) ? inf : 0;
    f[h + 1] = 0;
    pass(f.data(), o.data(), h + 2, v.data(), z.data());
    for (int y = 0; y < h; ++y) d[static_cast<size_t>(y) * w + x] = o[y + 1];
  };
  auto rows = [&](int y, std::vector<double>& f, std::vector<double>& o, std::vector<int>& v, std::vector<double>& z) {
    f[0] = 0;
    for (int x = 0; x < w; ++x) f[x + 1] = d[static_cast<size_t>(y) * w + x];
    f[w + 1] = 0;
    pass(f.data(), o.data(), w + 2, v.data(), z.data());
    for (int x = 0; x < w; ++x) d[static_cast<size_t>(y) * w + x] = m.at(x, y) ? o[x + 1] : 0.0;
  };
  const int n = std::max(w, h) + 2;
  if (exec == Exec::Parallel) {
#pragma omp parallel
    {
      std::vector<double> f(n), o(n), z(n + 1);
      std::vector<int> v(n);
#pragma omp for schedule(static)
      for (int x = 0; x < w; ++x) columns(x, f, o, v, z);
#pragma omp for schedule(static)
      for (int y = 0; y < h; ++y) rows(y, f, o, v, z);
    }
  } else {
    std::vector<double> f(n), o(n), z(n + 1);
    std::vector<int> v(n);
    for (int x = 0; x < w; ++x) columns(x, f, o, v, z);
    for (int y = 0; y < h; ++y) rows(y, f, o, v, z);
  }
  return d;
}

namespace {

// Directional thinning with endpoint preservation until stable.
void directional_thinning(BinaryMask& out, Exec exec) {
  const int w = out.width, h = out.height;
  std::vector<std::uint8_t> flag(out.data.size());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Direction d : kDirections) {
      // Candidates are marked against a frozen copy; deletion re-checks them
      // in raster order so that no two removals can disconnect the shape.
      if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) flag[static_cast<size_t>(y) * w + x] = deletable(out, x, y, d);
      } else {
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) flag[static_cast<size_t>(y) * w + x] = deletable(out, x, y, d);
      }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const size_t i = static_cast<size_t>(y) * w + x;
          if (flag[i] && deletable(out, x, y, d)) {
            out.data[i] = 0;
            changed = true;
          }
        }
    }
  }
}

}  // namespace

BinaryMask skeletonize(const BinaryMask& mask, Exec exec) {
  BinaryMask out = mask;
  for (auto& v : out.data) v = v ? 1 : 0;
  const int w = out.width, h = out.height;
  if (w == 0 || h == 0) return out;
  const auto dist = squared_distance_transform(out, exec);

  // Ridge pixels (distance not exceeded by any neighbour, deeper than one pixel)
  // anchor the skeleton so that it ends where the medial axis ends.
  std::vector<std::uint8_t> anchor(out.data.size(), 0);
  auto mark = [&](int y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (!out.data[i] || dist[i] < 2.0) continue;
      bool ridge = true;
      for (int k = 0; k < 8 && ridge; ++k) {
        const int qx = x + kDx[k], qy = y + kDy[k];
        if (out.inside(qx, qy) && dist[static_cast<size_t>(qy) * w + qx] > dist[i]) ridge = false;
      }
      anchor[i] = ridge;
    }
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) mark(y);
  } else {
    for (int y = 0; y < h; ++y) mark(y);
  }

  // Peel simple non-ridge pixels from the outside in. Endpoints are not
  // protected here: where the skeleton ends is decided by the ridge.
  std::vector<int> order;
  for (size_t i = 0; i < out.data.size(); ++i)
    if (out.data[i] && !anchor[i]) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i : order) {
      if (!out.data[i]) continue;
      const int x = i % w, y = i / w;
      if (is_simple(out, x, y)) {
        out.data[i] = 0;
        changed = true;
      }
    }
  }
  directional_thinning(out, exec);
  return out;
}

int count_components(const BinaryMask& m) {
  std::vector<std::uint8_t> seen(m.data.size(), 0);
  std::vector<int> stack;
  int comps = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const size_t i = static_cast<size_t>(y) * m.width + x;
      if (!m.data[i] || seen[i]) continue;
      ++comps;
      seen[i] = 1;
      stack.push_back(static_cast<int>(i));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int px = p % m.width, py = p / m.width;
        for (int k = 0; k < 8; ++k) {
          const int qx = px + kDx[k], qy = py + kDy[k];
          if (!m.inside(qx, qy)) continue;
          const size_t q = static_cast<size_t>(qy) * m.width + qx;
          if (m.data[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(static_cast<int>(q));
          }
        }
      }
    }
  return comps;
}

}  // namespace endotrack::tiplocate
