#pragma once

#include <string>
#include <vector>

#include "fieldloom/polygonize.hpp"

namespace fieldloom {

struct TileRect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0; // global pixel bounds

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

struct MergeParams {
    double overlap_ratio = 0.30; // of the smaller polygon's area
    double min_sliver_m2 = 9.0;  // 4 px
    double overlap_px = 256;     // width of the inter-tile overlap strip
};

struct TileSlot {
    std::vector<FieldPolygon> polygons;
    TileRect rect;
};

// Per-resolution diagnostic record; rule is 'A', 'B', 'C' or 'D'.
struct MergeEvent {
    char rule;
    std::string winner; // empty for rule B
    std::string loser;  // removed, dissolved-away, or differenced polygon
};

// Applies the overlap-resolution rules across a set of overlapping tiles until
// a fixpoint: (A) duplicate complete polygons keep the higher confidence,
// (B) incomplete polygons fully covered by a neighboring tile are dropped,
// (C) polygons truncated on both sides of an overlap strip are dissolved,
// (D) residual overlaps are differenced out of the lower-confidence polygon.
std::vector<FieldPolygon> merge_tiles(const std::vector<TileSlot>& slots,
                                      const TileRect& enclosing, const MergeParams& params,
                                      std::vector<MergeEvent>* log = nullptr);

// 3x3 neighborhood merge: center tile plus its 8 neighbors into one super-tile.
std::vector<FieldPolygon> merge_neighborhood(const std::vector<TileSlot>& nine_slots,
                                             const TileRect& super_tile_rect,
                                             const MergeParams& params);

struct SuperTileSet {
    int block_i = 0; // super-tile column (tile index / 3)
    int block_j = 0;
    TileRect rect;
    std::vector<FieldPolygon> polygons;
};

// Two-level national merge: per-3x3-block neighborhood merges, then one seam
// pass across super-tiles, then assignment of each polygon to the super-tile
// containing its centroid (half-open intervals).
std::vector<SuperTileSet> merge_pass(const std::vector<std::vector<TileSlot>>& tile_rows,
                                     const MergeParams& params);

// Non-strict intersection with linear waterway features.
void flag_waterways(std::vector<FieldPolygon>& polygons, const std::vector<Polyline>& waterways);

} // namespace fieldloom
