#include "fieldloom/grid_agg.hpp"

#include <cmath>
#include <stdexcept>

#include "fieldloom/csv.hpp"
#include "fieldloom/raster_ops.hpp"

namespace fieldloom {

const std::array<const char*, kNumSizeCategories> kSizeCategoryNames = {
    "lt_0.1", "0.1_0.5", "0.5_1.0", "1.0_2.5", "2.5_5.0", "gt_5.0"};

int size_category(double area_ha) {
    if (area_ha < 0.1) return 0;
    if (area_ha < 0.5) return 1;
    if (area_ha < 1.0) return 2;
    if (area_ha < 2.5) return 3;
    if (area_ha < 5.0) return 4;
    return 5;
}

AggGrid make_agg_grid(const GridRef& ref, double extent_px_x, double extent_px_y,
                      double cell_size_deg) {
    AggGrid g;
    g.origin_lon = ref.origin_lon;
    g.origin_lat = ref.origin_lat;
    g.cell_size_deg = cell_size_deg;
    g.n_cols = static_cast<int>(std::ceil(extent_px_x * ref.pixel_size_deg / cell_size_deg - 1e-9));
    g.n_rows = static_cast<int>(std::ceil(extent_px_y * ref.pixel_size_deg / cell_size_deg - 1e-9));
    g.n_cols = std::max(g.n_cols, 1);
    g.n_rows = std::max(g.n_rows, 1);
    return g;
}

namespace {

// Area from the equator to latitude phi on the WGS84 ellipsoid, all longitudes.
double slice_area_km2(double lat_deg) {
    constexpr double a = 6378.137;
    constexpr double b = 6356.7523142;
    const double e = std::sqrt(1.0 - (b / a) * (b / a));
    const double f = lat_deg * M_PI / 180.0;
    const double s = std::sin(f);
    return M_PI * b * b * ((2.0 * std::atanh(e * s)) / (2.0 * e) + s / ((1.0 + e * s) * (1.0 - e * s)));
}

} // namespace

double cell_area_km2(double lat_south_deg, double cell_size_deg) {
    if (std::abs(lat_south_deg) >= 90.0 || std::abs(lat_south_deg + cell_size_deg) >= 90.0)
        throw std::invalid_argument("cell_area_km2: pole-adjacent latitude");
    return (slice_area_km2(lat_south_deg + cell_size_deg) - slice_area_km2(lat_south_deg)) *
           (cell_size_deg / 360.0);
}

std::vector<CellStats> aggregate_cells(const std::vector<FieldPolygon>& polygons,
                                       const std::vector<QaTile>& qa_tiles, const GridRef& ref,
                                       const AggGrid& grid) {
    const size_t n_cells = static_cast<size_t>(grid.n_cols) * grid.n_rows;
    const double deg_per_px = ref.pixel_size_deg;
    const double px_per_cell = grid.cell_size_deg / deg_per_px;

    auto cell_of_px = [&](double x, double y) -> long long {
        int cx = static_cast<int>(x / px_per_cell);
        int cy = static_cast<int>(y / px_per_cell);
        if (cx < 0 || cx >= grid.n_cols || cy < 0 || cy >= grid.n_rows) return -1;
        return static_cast<long long>(cy) * grid.n_cols + cx;
    };

    std::vector<long long> total_px(n_cells, 0), valid_px(n_cells, 0), crop_px(n_cells, 0);
    std::vector<double> size_px_sum(n_cells, 0), size_simple_sum(n_cells, 0);
    std::vector<long long> n_fields(n_cells, 0);
    std::vector<std::array<long long, kNumSizeCategories>> fields_cat(n_cells);
    std::vector<std::array<long long, kNumSizeCategories>> area_cat(n_cells);
    for (auto& a : fields_cat) a.fill(0);
    for (auto& a : area_cat) a.fill(0);

    for (const QaTile& qa : qa_tiles) {
        for (long long gy = qa.owned_y0; gy < qa.owned_y1; ++gy) {
            int r = static_cast<int>(gy - qa.frame.px_y);
            for (long long gx = qa.owned_x0; gx < qa.owned_x1; ++gx) {
                int c = static_cast<int>(gx - qa.frame.px_x);
                long long cell = cell_of_px(gx + 0.5, gy + 0.5);
                if (cell < 0) continue;
                ++total_px[cell];
                if (qa.codes(r, c) == static_cast<uint8_t>(QaCode::valid)) ++valid_px[cell];
            }
        }
    }

    for (const auto& poly : polygons) {
        int cat = size_category(poly.area_ha);
        for_each_covered_pixel(poly.geom, [&](long long gy, long long gx) {
            long long cell = cell_of_px(gx + 0.5, gy + 0.5);
            if (cell < 0) return;
            ++crop_px[cell];
            size_px_sum[cell] += poly.area_ha;
            ++area_cat[cell][cat];
        });
        GeoPoint c = geom_centroid(poly.geom);
        long long cell = cell_of_px(c.x(), c.y());
        if (cell >= 0) {
            ++n_fields[cell];
            ++fields_cat[cell][cat];
            size_simple_sum[cell] += poly.area_ha;
        }
    }

    std::vector<CellStats> out;
    out.reserve(n_cells);
    for (int cy = 0; cy < grid.n_rows; ++cy) {
        for (int cx = 0; cx < grid.n_cols; ++cx) {
            size_t i = static_cast<size_t>(cy) * grid.n_cols + cx;
            CellStats s;
            s.cell_x = cx;
            s.cell_y = cy;
            s.cell_area_km2 = cell_area_km2(grid.cell_south_lat(cy), grid.cell_size_deg);
            s.has_data = valid_px[i] > 0;
            s.crop_pixels = crop_px[i];
            s.valid_pixels = valid_px[i];
            s.total_pixels = total_px[i];
            s.valid_fraction = total_px[i] > 0
                                   ? static_cast<double>(valid_px[i]) / static_cast<double>(total_px[i])
                                   : 0.0;
            if (s.has_data)
                s.cropland_fraction =
                    static_cast<double>(crop_px[i]) / static_cast<double>(valid_px[i]);
            if (crop_px[i] > 0)
                s.mean_field_size_ha = size_px_sum[i] / static_cast<double>(crop_px[i]);
            s.n_fields = n_fields[i];
            if (n_fields[i] > 0) {
                s.mean_field_size_simple_ha = size_simple_sum[i] / static_cast<double>(n_fields[i]);
                for (int k = 0; k < kNumSizeCategories; ++k)
                    s.fields_frac_by_cat[k] =
                        static_cast<double>(fields_cat[i][k]) / static_cast<double>(n_fields[i]);
            }
            if (crop_px[i] > 0)
                for (int k = 0; k < kNumSizeCategories; ++k)
                    s.area_frac_by_cat[k] =
                        static_cast<double>(area_cat[i][k]) / static_cast<double>(crop_px[i]);
            out.push_back(s);
        }
    }
    return out;
}

namespace {

// Per-cell counts of set pixels in a binary raster, on the aggregation grid.
void count_binary(const TypedRaster<uint8_t>& raster, const AggGrid& grid,
                  std::vector<long long>& set_px, std::vector<long long>& total_px) {
    const RasterMeta& m = raster.meta;
    const auto& band = raster.bands.at(0);
    for (int r = 0; r < m.height; ++r) {
        double lat = m.lat_of_row(r + 0.5);
        int cy = static_cast<int>((grid.origin_lat - lat) / grid.cell_size_deg);
        if (cy < 0 || cy >= grid.n_rows) continue;
        for (int c = 0; c < m.width; ++c) {
            double lon = m.lon_of_col(c + 0.5);
            int cx = static_cast<int>((lon - grid.origin_lon) / grid.cell_size_deg);
            if (cx < 0 || cx >= grid.n_cols) continue;
            size_t cell = static_cast<size_t>(cy) * grid.n_cols + cx;
            ++total_px[cell];
            if (band(r, c) != 0) ++set_px[cell];
        }
    }
}

} // namespace

std::vector<ForestChangeCell> net_forest_change(const TypedRaster<uint8_t>& forest2010,
                                                const TypedRaster<uint8_t>& forest2020,
                                                const AggGrid& grid) {
    if (forest2010.meta.width != forest2020.meta.width ||
        forest2010.meta.height != forest2020.meta.height ||
        forest2010.meta.geotransform != forest2020.meta.geotransform)
        throw std::invalid_argument("net_forest_change: rasters are not co-registered");

    const size_t n_cells = static_cast<size_t>(grid.n_cols) * grid.n_rows;
    std::vector<long long> f10(n_cells, 0), f20(n_cells, 0), total(n_cells, 0), total2(n_cells, 0);
    count_binary(forest2010, grid, f10, total);
    count_binary(forest2020, grid, f20, total2);

    std::vector<ForestChangeCell> out;
    out.reserve(n_cells);
    for (int cy = 0; cy < grid.n_rows; ++cy) {
        for (int cx = 0; cx < grid.n_cols; ++cx) {
            size_t i = static_cast<size_t>(cy) * grid.n_cols + cx;
            ForestChangeCell c;
            c.cell_x = cx;
            c.cell_y = cy;
            if (total[i] > 0) {
                c.forest_2010_frac = static_cast<double>(f10[i]) / static_cast<double>(total[i]);
                c.forest_2020_frac = static_cast<double>(f20[i]) / static_cast<double>(total[i]);
            }
            if (f10[i] > 0) {
                c.defined = true;
                c.net_change_pct = 100.0 * (c.forest_2020_frac - c.forest_2010_frac) / c.forest_2010_frac;
                c.no_net_change = std::abs(c.net_change_pct) <= 1.0;
            }
            out.push_back(c);
        }
    }
    return out;
}

ProductComparison compare_products(const std::vector<CellStats>& ours,
                                   const std::vector<double>& other_fraction,
                                   const AggGrid& grid) {
    const size_t n_cells = static_cast<size_t>(grid.n_cols) * grid.n_rows;
    if (ours.size() != n_cells || other_fraction.size() != n_cells)
        throw std::invalid_argument("compare_products: grid dimensions do not match");

    ProductComparison cmp;
    cmp.delta.resize(n_cells);
    cmp.newly_cropped.resize(n_cells, 0);
    for (size_t i = 0; i < n_cells; ++i) {
        cmp.delta[i] = ours[i].cropland_fraction - other_fraction[i];
        cmp.newly_cropped[i] =
            (ours[i].cropland_fraction > 0.01 && other_fraction[i] <= 0.01) ? 1 : 0;
    }
    return cmp;
}

void write_cell_stats_csv(const std::string& path, const std::vector<CellStats>& cells,
                          const AggGrid& grid) {
    CsvTable t;
    t.header = {"cell_x", "cell_y", "lon_w", "lat_s", "cell_area_km2", "valid_fraction",
                "cropland_fraction", "mean_field_size_ha", "mean_field_size_simple_ha", "n_fields",
                "crop_pixels", "valid_pixels", "total_pixels"};
    for (const char* n : kSizeCategoryNames) t.header.push_back(std::string("fields_frac_") + n);
    for (const char* n : kSizeCategoryNames) t.header.push_back(std::string("area_frac_") + n);
    t.header.push_back("has_data");

    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.8g", v);
        return std::string(buf);
    };
    for (const auto& c : cells) {
        std::vector<std::string> row{std::to_string(c.cell_x),
                                     std::to_string(c.cell_y),
                                     fmt(grid.cell_west_lon(c.cell_x)),
                                     fmt(grid.cell_south_lat(c.cell_y)),
                                     fmt(c.cell_area_km2),
                                     fmt(c.valid_fraction),
                                     fmt(c.cropland_fraction),
                                     fmt(c.mean_field_size_ha),
                                     fmt(c.mean_field_size_simple_ha),
                                     std::to_string(c.n_fields),
                                     std::to_string(c.crop_pixels),
                                     std::to_string(c.valid_pixels),
                                     std::to_string(c.total_pixels)};
        for (double v : c.fields_frac_by_cat) row.push_back(fmt(v));
        for (double v : c.area_frac_by_cat) row.push_back(fmt(v));
        row.push_back(c.has_data ? "1" : "0");
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

void write_cell_stats_rasters(const std::string& base_path, const std::vector<CellStats>& cells,
                              const AggGrid& grid) {
    RasterMeta meta;
    meta.width = grid.n_cols;
    meta.height = grid.n_rows;
    meta.geotransform = {grid.origin_lon, grid.cell_size_deg, 0,
                         grid.origin_lat, 0, -grid.cell_size_deg};
    meta.nodata = -9999.0;

    Grid<double> crop_frac(grid.n_cols, grid.n_rows, -9999.0);
    Grid<double> mean_size(grid.n_cols, grid.n_rows, -9999.0);
    Grid<double> fields(grid.n_cols, grid.n_rows, -9999.0);
    for (const auto& c : cells) {
        size_t i = static_cast<size_t>(c.cell_y) * grid.n_cols + c.cell_x;
        if (!c.has_data) continue;
        crop_frac.data[i] = c.cropland_fraction;
        mean_size.data[i] = c.mean_field_size_ha;
        fields.data[i] = static_cast<double>(c.n_fields);
    }
    write_raster<double>(base_path, meta, {crop_frac, mean_size, fields});
}

} // namespace fieldloom
