#pragma once

#include <string>
#include <vector>

#include "fieldloom/raster_io.hpp"

namespace fieldloom {

struct AoiBounds {
    double lon_min = 0, lat_min = 0, lon_max = 0, lat_max = 0;
};

// Regular tile grid anchored at the AOI's northwest corner. Tile (col i, row j)
// starts at pixel (i*step, j*step); step = tile_size_px - overlap_px.
struct TileGrid {
    double origin_lon = 0; // NW corner
    double origin_lat = 0;
    double pixel_size_deg = 0.0000135; // 1.5 m
    int tile_size_px = 4096;
    int overlap_px = 256;
    int n_cols = 0;
    int n_rows = 0;

    int step_px() const { return tile_size_px - overlap_px; }
    long long n_tiles() const { return static_cast<long long>(n_cols) * n_rows; }

    // Global pixel origin of tile (i, j).
    long long tile_px_x(int i) const { return static_cast<long long>(i) * step_px(); }
    long long tile_px_y(int j) const { return static_cast<long long>(j) * step_px(); }

    std::string tile_id(int i, int j) const;

    // Geotransform for tile (i, j) in the sidecar raster convention.
    RasterMeta tile_meta(int i, int j, int bands, const std::string& dtype) const;

    // All tiles whose pixel extent contains the given geographic point.
    std::vector<std::pair<int, int>> covering_tiles(double lon, double lat) const;
};

TileGrid build_tile_grid(const AoiBounds& aoi, double pixel_size_deg, int tile_size_px,
                         int overlap_px);

} // namespace fieldloom
