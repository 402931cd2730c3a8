#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldloom/geometry.hpp"
#include "fieldloom/grid.hpp"
#include "fieldloom/raster_io.hpp"

namespace fieldloom {

struct ProbabilityTile {
    std::string tile_id;
    RasterMeta meta;          // geotransform of the tile
    Grid<float> extent_prob;  // [0,1]
    Grid<float> boundary_prob;
    Grid<float> distance;     // normalized within-field distance
};

enum class SeedStrategy : uint8_t {
    low_boundary, // 4-connected components of mask with boundary_prob < t_bnd
    distance_peak // alternative: components of mask with distance >= seed threshold
};

struct SegmentationParams {
    double t_ext = 0.2;
    double t_bnd = 0.2;
    int min_instance_px = 4; // instances below this are dropped (9 m^2 at 1.5 m)
    SeedStrategy seed_strategy = SeedStrategy::low_boundary;
    double distance_seed_threshold = 0.5; // used by SeedStrategy::distance_peak
};

struct InstanceRaster {
    Grid<int32_t> ids;                  // 0 = background; ids contiguous from 1
    std::vector<double> confidences;    // confidences[k] = instance k+1 median extent prob
    std::vector<int64_t> pixel_counts;  // pixel_counts[k] = instance k+1 size

    int32_t n_instances() const { return static_cast<int32_t>(confidences.size()); }
};

// Hierarchical watershed: threshold extent at t_ext, seed from low-boundary
// components, flood over the boundary probability surface with a priority
// queue ordered by (elevation asc, row-major index asc). Deterministic.
InstanceRaster segment_tile(const ProbabilityTile& tile, const SegmentationParams& params);

struct GridSearchCell {
    double t_ext = 0;
    double t_bnd = 0;
    double mean_iou = 0;
    double iou50 = 0; // fraction of reference fields matched with IoU > 0.5
};

struct GridSearchResult {
    SegmentationParams best;
    double best_mean_iou = 0;
    std::vector<GridSearchCell> surface;
};

// Reference tile for hyperparameter search: probabilities plus human-labeled
// reference field polygons in the same pixel frame.
struct ReferenceTile {
    ProbabilityTile tile;
    std::vector<PolyGeom> reference_fields; // tile pixel coordinates
};

GridSearchResult grid_search(const std::vector<ReferenceTile>& tiles,
                             const std::vector<double>& t_ext_candidates,
                             const std::vector<double>& t_bnd_candidates,
                             const SegmentationParams& base = {});

void write_grid_search_csv(const std::string& path, const GridSearchResult& result);

} // namespace fieldloom
