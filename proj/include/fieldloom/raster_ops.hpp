#pragma once

#include <cstdint>
#include <functional>

#include "fieldloom/geometry.hpp"
#include "fieldloom/grid.hpp"

namespace fieldloom {

// Exact Euclidean distance (in pixel units) from every cell to the nearest
// source cell, via the two-pass lower-envelope transform. Cells with no source
// anywhere get a large finite sentinel.
Grid<float> distance_to_sources(const Grid<uint8_t>& is_source);

// Even-odd scanline rasterization: invokes fn(row, col) for every pixel whose
// center (col + 0.5, row + 0.5) lies inside the polygon. Coordinates are in
// the polygon's own pixel frame; callers clip rows/cols as needed.
void for_each_covered_pixel(const PolyGeom& poly,
                            const std::function<void(long long row, long long col)>& fn);

} // namespace fieldloom
