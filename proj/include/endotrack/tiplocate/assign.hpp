#pragma once

#include <vector>

#include "endotrack/tiplocate/graph.hpp"

namespace endotrack::tiplocate {

/// One entry node with the leaves matched to it.
struct InstrumentCandidate {
  int entry = -1;
  std::vector<int> tips;             ///< node indices, at most two
  std::vector<double> path_lengths;  ///< along-graph distance of each tip to the entry (px)
  std::vector<int> nodes;            ///< node indices of the instrument subgraph
  double chain_length = 0.0;         ///< longest tip path
};

/// Dot-product score of stepping from `cur` to `next` after arriving from `prev`.
double turn_score(const Vec2& prev, const Vec2& cur, const Vec2& next);

/// Walks from `leaf` toward an entry node, at each node trying neighbours in
/// decreasing dot-product order (ties to the lowest index) and backtracking
/// from dead ends. Returns the visited node sequence, empty if no entry is reachable.
std::vector<int> traverse_to_entry(const ToolGraph& g, int leaf);

/// Matches leaves to entry nodes, duplicating hidden leaves and splitting
/// crossings, then keeps at most two tips per entry and two instruments.
/// The graph is modified in place (labels, split nodes).
std::vector<InstrumentCandidate> assign_tips(ToolGraph& g);

}  // namespace endotrack::tiplocate
