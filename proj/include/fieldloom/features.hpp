#pragma once

#include <array>
#include <string>
#include <vector>

#include "fieldloom/polygonize.hpp"
#include "fieldloom/raster_io.hpp"

namespace fieldloom {

constexpr int kNumFilterFeatures = 8;

struct FeatureVector {
    double fractal_dimension = 0;
    double circ_area_ratio = 0;
    double tile_crop_frac = 0;
    double neigh3x3_crop_frac = 0;
    double neigh3x3_mean_size = 0; // ha
    double rel_size = 0;           // polygon size / 3x3 mean size
    double median_prob = 0;
    double rel_median_prob = 0;    // median prob / 3x3 mean of median prob

    std::array<double, kNumFilterFeatures> as_array() const;
    static const std::array<const char*, kNumFilterFeatures>& names();
};

// Precomputed cropland and polygon statistics for a polygon's 3x3 tile block.
struct NeighborhoodStats {
    double tile_crop_frac = 0;
    double neigh3x3_crop_frac = 0;
    double neigh3x3_mean_size_ha = 0;
    double neigh3x3_mean_median_prob = 0;
};

// fractal_dimension = 2*ln(P/4)/ln(A), circ_area_ratio = P/(2*sqrt(pi*A)),
// with perimeter in meters, area in square meters.
FeatureVector compute_features(const FieldPolygon& poly, const NeighborhoodStats& stats);

// Fraction of cropland (non-zero, non-nodata) pixels of the ancillary raster
// whose centers fall in [lon0,lon1) x [lat0,lat1).
double crop_fraction_in_bounds(const TypedRaster<uint8_t>& crop_raster, double lon0, double lat0,
                               double lon1, double lat1);

} // namespace fieldloom
