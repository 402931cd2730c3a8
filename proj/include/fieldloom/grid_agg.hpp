#pragma once

#include <array>
#include <string>
#include <vector>

#include "fieldloom/geojson.hpp"
#include "fieldloom/qa.hpp"
#include "fieldloom/raster_io.hpp"

namespace fieldloom {

// Field size categories in hectares: <0.1, 0.1-0.5, 0.5-1.0, 1.0-2.5,
// 2.5-5.0, >5.0. Edges closed on the left.
constexpr int kNumSizeCategories = 6;
int size_category(double area_ha);
extern const std::array<const char*, kNumSizeCategories> kSizeCategoryNames;

struct AggGrid {
    double origin_lon = 0; // NW corner, shared with the pixel grid
    double origin_lat = 0;
    double cell_size_deg = 0.05;
    int n_cols = 0;
    int n_rows = 0;

    double cell_south_lat(int cy) const { return origin_lat - (cy + 1) * cell_size_deg; }
    double cell_west_lon(int cx) const { return origin_lon + cx * cell_size_deg; }
};

AggGrid make_agg_grid(const GridRef& ref, double extent_px_x, double extent_px_y,
                      double cell_size_deg = 0.05);

// Area of the cell_size x cell_size quadrilateral whose southern edge sits at
// lat_south_deg, on the WGS84 ellipsoid (latitude slice formula).
double cell_area_km2(double lat_south_deg, double cell_size_deg = 0.05);

struct CellStats {
    int cell_x = 0;
    int cell_y = 0;
    double cell_area_km2 = 0;
    double valid_fraction = 0;    // share of in-AOI pixels not masked
    double cropland_fraction = 0; // crop pixels / valid pixels
    double mean_field_size_ha = 0;        // pixel-rasterized (area-weighted) mean
    double mean_field_size_simple_ha = 0; // plain mean over centroid-assigned fields
    long long n_fields = 0;
    long long crop_pixels = 0;  // raw counts at native resolution
    long long valid_pixels = 0;
    long long total_pixels = 0;
    std::array<double, kNumSizeCategories> fields_frac_by_cat{};
    std::array<double, kNumSizeCategories> area_frac_by_cat{};
    bool has_data = false; // false iff every pixel of the cell is masked
};

// QA tile plus the half-open pixel rectangle it owns (so overlap pixels are
// counted exactly once).
struct QaTile {
    TileFrame frame;
    Grid<uint8_t> codes; // QaCode values
    long long owned_x0 = 0, owned_y0 = 0, owned_x1 = 0, owned_y1 = 0;
};

std::vector<CellStats> aggregate_cells(const std::vector<FieldPolygon>& polygons,
                                       const std::vector<QaTile>& qa_tiles, const GridRef& ref,
                                       const AggGrid& grid);

struct ForestChangeCell {
    int cell_x = 0;
    int cell_y = 0;
    double forest_2010_frac = 0;
    double forest_2020_frac = 0;
    double net_change_pct = 0; // 100*(f2020-f2010)/f2010
    bool defined = false;      // false when f2010 == 0
    bool no_net_change = false; // |net change| <= 1%
};

std::vector<ForestChangeCell> net_forest_change(const TypedRaster<uint8_t>& forest2010,
                                                const TypedRaster<uint8_t>& forest2020,
                                                const AggGrid& grid);

struct ProductComparison {
    std::vector<double> delta;       // ours - other, per cell (row-major)
    std::vector<uint8_t> newly_cropped; // ours > 1% and other <= 1%
};

ProductComparison compare_products(const std::vector<CellStats>& ours,
                                   const std::vector<double>& other_fraction,
                                   const AggGrid& grid);

void write_cell_stats_csv(const std::string& path, const std::vector<CellStats>& cells,
                          const AggGrid& grid);
void write_cell_stats_rasters(const std::string& base_path, const std::vector<CellStats>& cells,
                              const AggGrid& grid);

} // namespace fieldloom
