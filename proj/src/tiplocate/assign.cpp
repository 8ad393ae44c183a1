#include "endotrack/tiplocate/assign.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>

namespace endotrack::tiplocate {

namespace {

Vec2 unit(const Vec2& v) {
  const double n = v.norm();
  return n > 1e-12 ? Vec2(v / n) : Vec2::Zero();
}

int edge_between(const ToolGraph& g, int a, int b) {
  for (int e : g.incident(a))
    if (g.edges[e].other(a) == b) return e;
  return -1;
}

bool walk(const ToolGraph& g, int prev, int cur, std::vector<std::uint8_t>& visited, std::vector<int>& path) {
  if (g.nodes[cur].entry) return true;
  std::vector<std::pair<double, int>> options;
  for (int e : g.incident(cur)) {
    const int m = g.edges[e].other(cur);
    if (visited[m]) continue;
    options.emplace_back(turn_score(g.nodes[prev].p, g.nodes[cur].p, g.nodes[m].p), m);
  }
  std::sort(options.begin(), options.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  for (const auto& [score, m] : options) {
    if (visited[m]) continue;
    visited[m] = 1;
    path.push_back(m);
    if (walk(g, cur, m, visited, path)) return true;
    path.pop_back();
  }
  return false;
}

double path_length(const ToolGraph& g, const std::vector<int>& path) {
  double len = 0;
  for (size_t k = 1; k < path.size(); ++k) len += g.edges[edge_between(g, path[k - 1], path[k])].length;
  return len;
}

struct Match {
  int leaf;
  int entry;
  std::vector<int> path;
  double length;
};

class Assigner {
 public:
  explicit Assigner(ToolGraph& g) : g_(g) {
    const auto entries = g_.entries();
    for (size_t k = 0; k < entries.size() && k < 32; ++k) bit_[entries[k]] = 1u << k;
  }

  std::vector<InstrumentCandidate> run() {
    for (int leaf : g_.leaves()) match_leaf(leaf);
    for (const auto& [entry, bit] : bit_)
      for (int e : g_.incident(entry)) g_.edges[e].labels |= bit;
    split_overlaps();
    pair_unmatched_entries();
    return prune();
  }

 private:
  void match_leaf(int leaf) {
    auto path = traverse_to_entry(g_, leaf);
    if (path.empty()) return;
    const int entry = path.back();
    if (!bit_.count(entry)) return;
    for (size_t k = 1; k < path.size(); ++k) g_.edges[edge_between(g_, path[k - 1], path[k])].labels |= bit_[entry];
    const double len = path_length(g_, path);
    matches_.push_back({leaf, entry, std::move(path), len});
  }

  // Hidden leaves (degree 2 or 3) and crossings (degree 4) whose incident
  // edges are all labelled by single, differing entries.
  void split_overlaps() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v : g_.live_nodes()) {
        if (g_.nodes[v].entry) continue;
        const auto inc = g_.incident(v);
        if (inc.size() < 2 || inc.size() > 4) continue;
        std::map<std::uint32_t, std::vector<int>> groups;
        bool eligible = true;
        for (int e : inc) {
          const auto l = g_.edges[e].labels;
          if (std::popcount(l) != 1) {
            eligible = false;
            break;
          }
          groups[l].push_back(e);
        }
        if (!eligible || groups.size() < 2) continue;
        if (inc.size() == 4 && !(groups.size() == 2 && groups.begin()->second.size() == 2)) continue;
        std::vector<int> fresh;
        bool first = true;
        for (const auto& [label, edges] : groups) {
          if (first) {
            first = false;
            if (edges.size() == 1) fresh.push_back(v);
            continue;
          }
          const int copy = g_.add_node(g_.nodes[v].p);
          for (int e : edges) {
            auto& ed = g_.edges[e];
            if (ed.a == v) ed.a = copy;
            if (ed.b == v) ed.b = copy;
          }
          if (edges.size() == 1) fresh.push_back(copy);
        }
        for (int leaf : fresh) match_leaf(leaf);
        changed = true;
        break;
      }
    }
  }

  // Entries no leaf reached take the furthest node reachable through edges
  // that are unlabelled or carry their own label.
  void pair_unmatched_entries() {
    for (const auto& [entry, bit] : bit_) {
      const bool matched = std::any_of(matches_.begin(), matches_.end(), [&](const Match& m) { return m.entry == entry; });
      if (matched) continue;
      std::map<int, double> dist;
      std::map<int, int> parent;
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
      dist[entry] = 0;
      pq.emplace(0.0, entry);
      while (!pq.empty()) {
        const auto [d, n] = pq.top();
        pq.pop();
        if (d > dist[n]) continue;
        for (int e : g_.incident(n)) {
          const auto& ed = g_.edges[e];
          if (ed.labels != 0 && ed.labels != bit) continue;
          const int m = ed.other(n);
          if (g_.nodes[m].entry) continue;
          const double nd = d + ed.length;
          auto it = dist.find(m);
          if (it == dist.end() || nd < it->second) {
            dist[m] = nd;
            parent[m] = n;
            pq.emplace(nd, m);
          }
        }
      }
      int best = -1;
      double best_d = 0;
      for (const auto& [n, d] : dist)
        if (n != entry && d > best_d) {
          best_d = d;
          best = n;
        }
      if (best < 0) continue;
      std::vector<int> path{best};
      while (path.back() != entry) path.push_back(parent[path.back()]);
      for (size_t k = 1; k < path.size(); ++k) g_.edges[edge_between(g_, path[k - 1], path[k])].labels |= bit;
      matches_.push_back({best, entry, std::move(path), best_d});
    }
  }

  std::vector<InstrumentCandidate> prune() {
    std::map<int, std::vector<const Match*>> by_entry;
    for (const auto& m : matches_) by_entry[m.entry].push_back(&m);
    std::vector<InstrumentCandidate> out;
    for (auto& [entry, list] : by_entry) {
      std::stable_sort(list.begin(), list.end(), [](const Match* a, const Match* b) { return a->length > b->length; });
      if (list.size() > 2) list.resize(2);
      InstrumentCandidate c;
      c.entry = entry;
      std::set<int> nodes;
      for (const Match* m : list) {
        c.tips.push_back(m->leaf);
        c.path_lengths.push_back(m->length);
        c.chain_length = std::max(c.chain_length, m->length);
        nodes.insert(m->path.begin(), m->path.end());
      }
      c.nodes.assign(nodes.begin(), nodes.end());
      out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.chain_length > b.chain_length; });
    if (out.size() > 2) out.resize(2);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.entry < b.entry; });
    return out;
  }

  ToolGraph& g_;
  std::map<int, std::uint32_t> bit_;
  std::vector<Match> matches_;
};

}  // namespace

double turn_score(const Vec2& prev, const Vec2& cur, const Vec2& next) {
  return unit(cur - prev).dot(unit(next - cur));
}

std::vector<int> traverse_to_entry(const ToolGraph& g, int leaf) {
  const auto inc = g.incident(leaf);
  if (inc.size() != 1) return {};
  std::vector<std::uint8_t> visited(g.nodes.size(), 0);
  visited[leaf] = 1;
  const int first = g.edges[inc[0]].other(leaf);
  visited[first] = 1;
  std::vector<int> path{leaf, first};
  if (walk(g, leaf, first, visited, path)) return path;
  return {};
}

std::vector<InstrumentCandidate> assign_tips(ToolGraph& g) { return Assigner(g).run(); }

}  // namespace endotrack::tiplocate
