#pragma once

#include <string>
#include <vector>

#include "fieldloom/merge.hpp"

namespace fieldloom {

// Pixel <-> geographic frame of the shared grid.
struct GridRef {
    double origin_lon = 0;
    double origin_lat = 0;
    double pixel_size_deg = 0.0000135;

    double lon_of_x(double x) const { return origin_lon + x * pixel_size_deg; }
    double lat_of_y(double y) const { return origin_lat - y * pixel_size_deg; }
    double x_of_lon(double lon) const { return (lon - origin_lon) / pixel_size_deg; }
    double y_of_lat(double lat) const { return (origin_lat - lat) / pixel_size_deg; }
};

// FeatureCollection of field polygons; coordinates in lon/lat at 7 decimals,
// properties {id, tile_id, confidence, area_ha, waterway_flag, field_prob,
// complete}. Features ordered by id so reruns are byte-identical.
void write_field_geojson(const std::string& path, const std::vector<FieldPolygon>& polygons,
                         const GridRef& ref);
std::vector<FieldPolygon> read_field_geojson(const std::string& path, const GridRef& ref);

// Bare polygon collections (reference/ground-truth layers).
void write_plain_geojson(const std::string& path, const std::vector<PolyGeom>& polygons,
                         const GridRef& ref);
std::vector<PolyGeom> read_plain_geojson(const std::string& path, const GridRef& ref);

// LineString / MultiLineString features (waterways).
std::vector<Polyline> read_polylines_geojson(const std::string& path, const GridRef& ref);

} // namespace fieldloom
