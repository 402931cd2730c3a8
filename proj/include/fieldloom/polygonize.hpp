#pragma once

#include <string>
#include <vector>

#include "fieldloom/geometry.hpp"
#include "fieldloom/segmentation.hpp"

namespace fieldloom {

// Geometry lives in the shared global pixel frame (1 px = 1.5 m); conversion
// to lon/lat happens only at GeoJSON import/export.
struct FieldPolygon {
    std::string uid;     // unique across the run, e.g. "t0001_0002#17"
    std::string tile_id; // tile of origin
    PolyGeom geom;       // global pixel coordinates
    double confidence = 0;
    double area_ha = 0;
    bool complete = true;  // false iff the instance touched the tile border
    bool waterway = false; // set by flag_waterways
    double field_prob = -1.0; // set by field_filter; -1 = unset
};

struct TileFrame {
    std::string tile_id;
    long long px_x = 0; // global pixel origin of the tile
    long long px_y = 0;
    int width = 0;
    int height = 0;
};

constexpr double kPixelSizeM = 1.5;
constexpr double kPixelAreaM2 = kPixelSizeM * kPixelSizeM;

// Traces exact pixel-edge outlines (with interior-ring holes) for every
// instance. Polygon area equals pixel_count * 2.25 m^2 exactly.
std::vector<FieldPolygon> polygonize(const InstanceRaster& instances, const TileFrame& frame);

} // namespace fieldloom
