#include "fieldloom/features.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldloom {

std::array<double, kNumFilterFeatures> FeatureVector::as_array() const {
    return {fractal_dimension, circ_area_ratio,   tile_crop_frac, neigh3x3_crop_frac,
            neigh3x3_mean_size, rel_size,         median_prob,    rel_median_prob};
}

const std::array<const char*, kNumFilterFeatures>& FeatureVector::names() {
    static const std::array<const char*, kNumFilterFeatures> n = {
        "fractal_dimension", "circ_area_ratio",    "tile_crop_frac", "neigh3x3_crop_frac",
        "neigh3x3_mean_size", "rel_size",          "median_prob",    "rel_median_prob"};
    return n;
}

FeatureVector compute_features(const FieldPolygon& poly, const NeighborhoodStats& stats) {
    const double perimeter_m = bg::perimeter(poly.geom) * kPixelSizeM;
    const double area_m2 = geom_area(poly.geom) * kPixelAreaM2;
    if (area_m2 <= 1.0)
        throw std::invalid_argument("compute_features: degenerate geometry (area <= 1 m^2)");

    FeatureVector f;
    f.fractal_dimension = 2.0 * std::log(perimeter_m / 4.0) / std::log(area_m2);
    f.circ_area_ratio = perimeter_m / (2.0 * std::sqrt(M_PI * area_m2));
    f.tile_crop_frac = stats.tile_crop_frac;
    f.neigh3x3_crop_frac = stats.neigh3x3_crop_frac;
    f.neigh3x3_mean_size = stats.neigh3x3_mean_size_ha;
    f.rel_size = stats.neigh3x3_mean_size_ha > 0 ? poly.area_ha / stats.neigh3x3_mean_size_ha : 0.0;
    f.median_prob = poly.confidence;
    f.rel_median_prob = stats.neigh3x3_mean_median_prob > 0
                            ? poly.confidence / stats.neigh3x3_mean_median_prob
                            : 0.0;
    return f;
}

double crop_fraction_in_bounds(const TypedRaster<uint8_t>& crop_raster, double lon0, double lat0,
                               double lon1, double lat1) {
    const RasterMeta& m = crop_raster.meta;
    const double psx = m.geotransform[1];
    const double psy = -m.geotransform[5];
    int c0 = static_cast<int>(std::ceil((lon0 - m.geotransform[0]) / psx - 0.5));
    int c1 = static_cast<int>(std::ceil((lon1 - m.geotransform[0]) / psx - 0.5));
    int r0 = static_cast<int>(std::ceil((m.geotransform[3] - lat1) / psy - 0.5));
    int r1 = static_cast<int>(std::ceil((m.geotransform[3] - lat0) / psy - 0.5));
    c0 = std::max(c0, 0);
    r0 = std::max(r0, 0);
    c1 = std::min(c1, m.width);
    r1 = std::min(r1, m.height);

    const auto& band = crop_raster.bands.at(0);
    long long crop = 0, total = 0;
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
            uint8_t v = band(r, c);
            if (m.nodata && v == static_cast<uint8_t>(*m.nodata)) continue;
            ++total;
            if (v != 0) ++crop;
        }
    }
    return total > 0 ? static_cast<double>(crop) / total : 0.0;
}

} // namespace fieldloom
