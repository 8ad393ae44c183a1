#pragma once

#include <vector>

#include "endotrack/exec.hpp"
#include "endotrack/tiplocate/image.hpp"

namespace endotrack::tiplocate {

/// Topology-preserving thinning to a one-pixel-wide skeleton (8-connected
/// foreground, 4-connected background). Pixels are peeled in order of their
/// distance to the background, ridge pixels of the distance map are held back
/// until a final directional pass, and endpoints are kept.
BinaryMask skeletonize(const BinaryMask& mask, Exec exec = Exec::Parallel);

/// Exact squared Euclidean distance of every set pixel to the nearest unset
/// pixel; pixels beyond the raster count as unset.
std::vector<double> squared_distance_transform(const BinaryMask& mask, Exec exec = Exec::Parallel);

/// 8-neighbour count of a set pixel.
int neighbour_count(const BinaryMask& m, int x, int y);

/// True when clearing (x, y) leaves the 8-connectivity of the foreground and
/// the 4-connectivity of the background unchanged.
bool is_simple(const BinaryMask& m, int x, int y);

/// Number of 8-connected components.
int count_components(const BinaryMask& m);

}  // namespace endotrack::tiplocate
