#pragma once

#include "aft/types.hpp"

#include <vector>

namespace aft::detail
{

/// Indices of the points that are vertices of the 3D convex hull, ascending.
/// Points within a relative tolerance of an existing face are not vertices.
/// Throws DegenerateCloud when all points are coplanar.
std::vector<int> convex_hull_vertices(const Points& pts);

} // namespace aft::detail
