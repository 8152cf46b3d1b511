#pragma once

#include <array>
#include <vector>

#include "ischem/mesh.hpp"

namespace ischem::detail {

/// Delaunay triangulation of a 2D point set (incremental insertion with
/// guarded edge flips). Returns CCW triangles covering the convex hull.
/// Deterministic for a fixed input order.
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points);

}  // namespace ischem::detail
