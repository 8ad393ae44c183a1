#include "endotrack/tiplocate/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "endotrack/tiplocate/skeleton.hpp"

namespace endotrack::tiplocate {

namespace {

constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

double step_length(int a, int b, int w) {
  const int dx = a % w - b % w, dy = a / w - b / w;
  return (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
}

// Keeps only the shortest of parallel edges and drops self-loops.
void dedupe_edges(ToolGraph& g) {
  std::map<std::pair<int, int>, int> best;
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    auto& ed = g.edges[e];
    if (!ed.alive) continue;
    if (ed.a == ed.b) {
      g.remove_edge(e);
      continue;
    }
    const auto key = std::minmax(ed.a, ed.b);
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, e);
    } else if (g.edges[it->second].length > ed.length) {
      g.remove_edge(it->second);
      it->second = e;
    } else {
      g.remove_edge(e);
    }
  }
}

Vec2 centroid_of(const std::vector<int>& pixels, int w) {
  Vec2 c = Vec2::Zero();
  for (int p : pixels) c += Vec2(p % w, p / w);
  return c / static_cast<double>(pixels.size());
}

// Moves every edge of `from` onto `into` and kills `from`.
void absorb(ToolGraph& g, int into, int from) {
  for (int e : g.incident(from)) {
    auto& ed = g.edges[e];
    if (ed.a == from) ed.a = into;
    if (ed.b == from) ed.b = into;
  }
  auto& dst = g.nodes[into];
  auto& src = g.nodes[from];
  dst.pixels.insert(dst.pixels.end(), src.pixels.begin(), src.pixels.end());
  src.pixels.clear();
  src.alive = false;
}

}  // namespace

int ToolGraph::add_node(const Vec2& p) {
  GraphNode n;
  n.p = p;
  nodes.push_back(std::move(n));
  return static_cast<int>(nodes.size()) - 1;
}

int ToolGraph::add_edge(int a, int b, double length, std::vector<int> path) {
  GraphEdge e;
  e.a = a;
  e.b = b;
  e.length = length;
  e.path = std::move(path);
  edges.push_back(std::move(e));
  return static_cast<int>(edges.size()) - 1;
}

void ToolGraph::remove_edge(int e) { edges[e].alive = false; }

void ToolGraph::remove_node(int n) {
  for (int e : incident(n)) remove_edge(e);
  nodes[n].alive = false;
}

std::vector<int> ToolGraph::incident(int n) const {
  std::vector<int> out;
  for (int e = 0; e < static_cast<int>(edges.size()); ++e)
    if (edges[e].alive && (edges[e].a == n || edges[e].b == n)) out.push_back(e);
  return out;
}

std::vector<int> ToolGraph::live_nodes() const {
  std::vector<int> out;
  for (int n = 0; n < static_cast<int>(nodes.size()); ++n)
    if (nodes[n].alive) out.push_back(n);
  return out;
}

std::vector<int> ToolGraph::entries() const {
  std::vector<int> out;
  for (int n : live_nodes())
    if (nodes[n].entry) out.push_back(n);
  return out;
}

std::vector<int> ToolGraph::leaves() const {
  std::vector<int> out;
  for (int n : live_nodes())
    if (!nodes[n].entry && degree(n) == 1) out.push_back(n);
  return out;
}

void ToolGraph::compact() {
  std::vector<int> remap(nodes.size(), -1);
  std::vector<GraphNode> kept;
  for (int n = 0; n < static_cast<int>(nodes.size()); ++n)
    if (nodes[n].alive) {
      remap[n] = static_cast<int>(kept.size());
      kept.push_back(std::move(nodes[n]));
    }
  std::vector<GraphEdge> kept_edges;
  for (auto& e : edges)
    if (e.alive && remap[e.a] >= 0 && remap[e.b] >= 0) {
      e.a = remap[e.a];
      e.b = remap[e.b];
      kept_edges.push_back(std::move(e));
    }
  nodes = std::move(kept);
  edges = std::move(kept_edges);
}

ToolGraph build_graph(const BinaryMask& sk, const GraphOptions& opt) {
  ToolGraph g;
  g.width = sk.width;
  g.height = sk.height;
  const int w = sk.width;
  const size_t npx = sk.data.size();
  std::vector<int> node_of(npx, -1);
  std::vector<std::uint8_t> is_node(npx, 0), visited(npx, 0);

  for (int y = 0; y < sk.height; ++y)
    for (int x = 0; x < w; ++x)
      if (sk.at(x, y) && neighbour_count(sk, x, y) != 2) is_node[static_cast<size_t>(y) * w + x] = 1;

  // Node clusters: 8-connected groups of node pixels.
  std::vector<int> stack;
  for (size_t i = 0; i < npx; ++i) {
    if (!is_node[i] || node_of[i] >= 0) continue;
    const int id = g.add_node(Vec2::Zero());
    node_of[i] = id;
    stack.push_back(static_cast<int>(i));
    std::vector<int> pixels;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      pixels.push_back(p);
      for (int k = 0; k < 8; ++k) {
        const int qx = p % w + kDx[k], qy = p / w + kDy[k];
        if (!sk.inside(qx, qy)) continue;
        const size_t q = static_cast<size_t>(qy) * w + qx;
        if (is_node[q] && node_of[q] < 0) {
          node_of[q] = id;
          stack.push_back(static_cast<int>(q));
        }
      }
    }
    std::sort(pixels.begin(), pixels.end());
    g.nodes[id].p = centroid_of(pixels, w);
    g.nodes[id].pixels = std::move(pixels);
  }

  // Chains of two-neighbour pixels leaving each node.
  for (int n = 0; n < static_cast<int>(g.nodes.size()); ++n) {
    for (int q : g.nodes[n].pixels) {
      for (int k = 0; k < 8; ++k) {
        const int rx = q % w + kDx[k], ry = q / w + kDy[k];
        if (!sk.inside(rx, ry) || !sk.at(rx, ry)) continue;
        const int r = ry * w + rx;
        if (is_node[r] || visited[r]) continue;
        std::vector<int> path{r};
        visited[r] = 1;
        double length = step_length(q, r, w);
        int prev = q, cur = r, end = -1;
        for (;;) {
          int next = -1;
          for (int j = 0; j < 8; ++j) {
            const int sx = cur % w + kDx[j], sy = cur / w + kDy[j];
            if (!sk.inside(sx, sy) || !sk.at(sx, sy)) continue;
            const int s = sy * w + sx;
            if (s == prev || (!is_node[s] && visited[s])) continue;
            next = s;
            break;
          }
          if (next < 0) break;
          length += step_length(cur, next, w);
          if (is_node[next]) {
            end = node_of[next];
            break;
          }
          visited[next] = 1;
          path.push_back(next);
          prev = cur;
          cur = next;
        }
        if (end >= 0 && end != n) g.add_edge(n, end, length, std::move(path));
      }
    }
  }
  dedupe_edges(g);
  simplify_graph(g, opt);
  return g;
}

void simplify_graph(ToolGraph& g, const GraphOptions& opt) {
  const int w = std::max(g.width, 1);
  bool changed = true;
  while (changed) {
    changed = false;
    // Junction pairs joined by a very short edge describe one crossing.
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
      auto& ed = g.edges[e];
      if (!ed.alive || ed.length >= opt.merge_px) continue;
      if (g.nodes[ed.a].entry || g.nodes[ed.b].entry) continue;
      if (g.degree(ed.a) < 3 || g.degree(ed.b) < 3) continue;
      const int a = ed.a, b = ed.b;
      g.remove_edge(e);
      absorb(g, a, b);
      g.nodes[a].p = centroid_of(g.nodes[a].pixels, w);
      dedupe_edges(g);
      changed = true;
    }
    // Short spurs hanging off a junction.
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
      const auto& ed = g.edges[e];
      if (!ed.alive || ed.length >= opt.min_branch_px) continue;
      for (const auto& [leaf, hub] : {std::pair{ed.a, ed.b}, std::pair{ed.b, ed.a}}) {
        if (g.nodes[leaf].entry || g.degree(leaf) != 1 || g.degree(hub) < 3) continue;
        g.remove_node(leaf);
        changed = true;
        break;
      }
    }
  }
  // Nodes left without edges (isolated specks).
  for (int n : g.live_nodes())
    if (!g.nodes[n].entry && g.degree(n) == 0 && g.nodes[n].pixels.size() < 2) g.remove_node(n);
}

EntryBand EntryBand::for_content(int size, double inner_fraction) {
  EntryBand b;
  b.center = Vec2(0.5 * (size - 1), 0.5 * (size - 1));
  b.r_outer = 0.5 * size;
  b.r_inner = inner_fraction * b.r_outer;
  return b;
}

bool EntryBand::contains(double x, double y) const {
  const double r = (Vec2(x, y) - center).norm();
  return r >= r_inner && r <= r_outer;
}

void extract_entry_nodes(ToolGraph& g, const BinaryMask& mask, const EntryBand& band) {
  const int w = mask.width;
  std::vector<int> cluster(mask.data.size(), -1);
  std::vector<std::vector<int>> clusters;
  std::vector<int> stack;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (!mask.data[i] || cluster[i] >= 0 || !band.contains(x, y)) continue;
      const int id = static_cast<int>(clusters.size());
      clusters.emplace_back();
      cluster[i] = id;
      stack.push_back(i);
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        clusters[id].push_back(p);
        for (int k = 0; k < 8; ++k) {
          const int qx = p % w + kDx[k], qy = p / w + kDy[k];
          if (!mask.inside(qx, qy)) continue;
          const int q = qy * w + qx;
          if (mask.data[q] && cluster[q] < 0 && band.contains(qx, qy)) {
            cluster[q] = id;
            stack.push_back(q);
          }
        }
      }
    }

  std::vector<int> original = g.live_nodes();
  std::vector<std::uint8_t> taken(g.nodes.size(), 0);
  for (size_t c = 0; c < clusters.size(); ++c) {
    std::vector<int> captured;
    for (int n : original) {
      if (taken[n] || !g.nodes[n].alive) continue;
      for (int p : g.nodes[n].pixels)
        if (cluster[p] == static_cast<int>(c)) {
          captured.push_back(n);
          break;
        }
    }
    if (captured.empty()) {
      // The skeleton may stop short of the band; adopt the closest node.
      const Vec2 centre = centroid_of(clusters[c], w);
      double extent = 0;
      for (int p : clusters[c]) extent = std::max(extent, (Vec2(p % w, p / w) - centre).norm());
      int best = -1;
      double best_d = extent + 3.0;
      for (int n : original) {
        if (taken[n] || !g.nodes[n].alive) continue;
        const double d = (g.nodes[n].p - centre).norm();
        if (d <= best_d) {
          best_d = d;
          best = n;
        }
      }
      if (best < 0) continue;
      captured.push_back(best);
    }
    Vec2 pos = Vec2::Zero();
    for (int n : captured) pos += g.nodes[n].p;
    pos /= static_cast<double>(captured.size());
    const int keep = captured.front();
    for (size_t k = 1; k < captured.size(); ++k) absorb(g, keep, captured[k]);
    for (int n : captured) taken[n] = 1;
    g.nodes[keep].p = pos;
    g.nodes[keep].entry = true;
    dedupe_edges(g);
  }

  // Keep only what an entry node reaches.
  std::vector<std::uint8_t> reached(g.nodes.size(), 0);
  for (int r : g.entries()) {
    stack.assign(1, r);
    reached[r] = 1;
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      for (int e : g.incident(n)) {
        const int m = g.edges[e].other(n);
        if (!reached[m]) {
          reached[m] = 1;
          stack.push_back(m);
        }
      }
    }
  }
  for (int n : g.live_nodes())
    if (!reached[n]) g.remove_node(n);
}

}  // namespace endotrack::tiplocate
