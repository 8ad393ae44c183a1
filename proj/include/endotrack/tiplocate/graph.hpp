#pragma once

#include <cstdint>
#include <vector>

#include "endotrack/geom.hpp"
#include "endotrack/tiplocate/image.hpp"

namespace endotrack::tiplocate {

struct GraphNode {
  Vec2 p = Vec2::Zero();       ///< pixel position (centroid of its pixels)
  std::vector<int> pixels;     ///< linear indices of skeleton pixels merged into this node
  bool entry = false;
  bool alive = true;
};

struct GraphEdge {
  int a = -1, b = -1;
  double length = 0.0;         ///< along the skeleton (px)
  std::vector<int> path;       ///< interior chain pixels, a to b
  std::uint32_t labels = 0;    ///< bit k set: traversed toward entry node k
  bool alive = true;

  int other(int n) const { return n == a ? b : a; }
};

/// Skeleton graph. Removed nodes and edges are flagged dead so that indices
/// stay stable; `compact()` renumbers.
struct ToolGraph {
  int width = 0, height = 0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  int add_node(const Vec2& p);
  int add_edge(int a, int b, double length, std::vector<int> path = {});
  void remove_edge(int e);
  void remove_node(int n);
  /// Incident live edge indices.
  std::vector<int> incident(int n) const;
  int degree(int n) const { return static_cast<int>(incident(n).size()); }
  std::vector<int> live_nodes() const;
  std::vector<int> entries() const;
  /// Degree-1 live nodes that are not entries.
  std::vector<int> leaves() const;
  /// Drops dead elements and renumbers.
  void compact();
};

struct GraphOptions {
  double min_branch_px = 5.0;  ///< spurs shorter than this are pruned
  double merge_px = 4.0;       ///< junctions closer than this along an edge are merged
};

/// Junction pixels (>= 3 neighbours) and endpoints become nodes; chains of
/// two-neighbour pixels become edges. Rings without a node are dropped.
ToolGraph build_graph(const BinaryMask& skeleton, const GraphOptions& opt = {});

/// Removes short spurs hanging off junctions and merges nearby junctions.
void simplify_graph(ToolGraph& g, const GraphOptions& opt);

/// Annulus at the border of the circular content area.
struct EntryBand {
  Vec2 center = Vec2::Zero();
  double r_inner = 0, r_outer = 0;

  static EntryBand for_content(int size, double inner_fraction = 0.96);
  bool contains(double x, double y) const;
};

/// Collapses the graph nodes inside each connected cluster of band ∩ mask
/// into one entry node, then prunes what no entry reaches.
void extract_entry_nodes(ToolGraph& g, const BinaryMask& mask, const EntryBand& band);

}  // namespace endotrack::tiplocate
