#include "fieldloom/tile_grid.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldloom {

std::string TileGrid::tile_id(int i, int j) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "t%04d_%04d", i, j);
    return buf;
}

RasterMeta TileGrid::tile_meta(int i, int j, int bands, const std::string& dtype) const {
    RasterMeta m;
    m.width = tile_size_px;
    m.height = tile_size_px;
    m.bands = bands;
    m.dtype = dtype;
    m.geotransform = {origin_lon + tile_px_x(i) * pixel_size_deg, pixel_size_deg, 0.0,
                      origin_lat - tile_px_y(j) * pixel_size_deg, 0.0, -pixel_size_deg};
    return m;
}

std::vector<std::pair<int, int>> TileGrid::covering_tiles(double lon, double lat) const {
    std::vector<std::pair<int, int>> out;
    double px = (lon - origin_lon) / pixel_size_deg;
    double py = (origin_lat - lat) / pixel_size_deg;
    if (px < 0 || py < 0) return out;
    for (int i = std::max(0, static_cast<int>((px - tile_size_px) / step_px()));
         i < n_cols && tile_px_x(i) <= px; ++i) {
        if (px >= tile_px_x(i) && px < tile_px_x(i) + tile_size_px) {
            for (int j = std::max(0, static_cast<int>((py - tile_size_px) / step_px()));
                 j < n_rows && tile_px_y(j) <= py; ++j) {
                if (py >= tile_px_y(j) && py < tile_px_y(j) + tile_size_px)
                    out.emplace_back(i, j);
            }
        }
    }
    return out;
}

static int axis_tiles(double extent_px, int tile, int step) {
    if (extent_px <= tile) return 1;
    return static_cast<int>(std::ceil((extent_px - tile) / step)) + 1;
}

TileGrid build_tile_grid(const AoiBounds& aoi, double pixel_size_deg, int tile_size_px,
                         int overlap_px) {
    if (aoi.lon_max <= aoi.lon_min || aoi.lat_max <= aoi.lat_min)
        throw std::invalid_argument("build_tile_grid: degenerate AOI bounds");
    if (pixel_size_deg <= 0) throw std::invalid_argument("build_tile_grid: pixel size must be positive");
    if (tile_size_px <= overlap_px || overlap_px < 0)
        throw std::invalid_argument("build_tile_grid: need tile_size_px > overlap_px >= 0");

    TileGrid g;
    g.origin_lon = aoi.lon_min;
    g.origin_lat = aoi.lat_max; // NW anchor
    g.pixel_size_deg = pixel_size_deg;
    g.tile_size_px = tile_size_px;
    g.overlap_px = overlap_px;

    // Tolerate the float division landing a hair above an integer pixel count.
    const double eps = 1e-9;
    double w_px = (aoi.lon_max - aoi.lon_min) / pixel_size_deg - eps;
    double h_px = (aoi.lat_max - aoi.lat_min) / pixel_size_deg - eps;
    g.n_cols = axis_tiles(w_px, tile_size_px, g.step_px());
    g.n_rows = axis_tiles(h_px, tile_size_px, g.step_px());
    return g;
}

} // namespace fieldloom
