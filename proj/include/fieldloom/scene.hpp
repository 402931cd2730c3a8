#pragma once

#include <cstdint>
#include <vector>

#include "fieldloom/geojson.hpp"
#include "fieldloom/grid_agg.hpp"
#include "fieldloom/segmentation.hpp"

namespace fieldloom {

struct SceneParams {
    uint64_t seed = 7;
    int n_fields = 500;
    double noise_level = 0.1; // probability rasters = truth*(1-noise) + noise*U(0,1)
    int tiles_x = 3;
    int tiles_y = 3;
    int tile_size_px = 768;
    int overlap_px = 64;
    double cropland_cover = 0.55; // share of the scene inside cropland patches
    int n_patches = 2;            // rectangular cropland patches
    double masked_fraction = 0.0; // pixels marked cloud in the QA layer
    double origin_lon = 36.0;
    double origin_lat = -15.0;
    double pixel_size_deg = 0.0000135;
};

// Ground truth plus derived model-output rasters for end-to-end verification.
// Fields are the discrete Voronoi cells of jittered-grid seeds inside the
// cropland patches, so cells are convex-ish and never degenerate.
struct SyntheticScene {
    SceneParams params;
    int extent_x = 0; // full-scene pixels
    int extent_y = 0;
    GridRef ref;

    Grid<int32_t> truth_ids; // 0 = background
    std::vector<FieldPolygon> truth_polygons;

    Grid<float> extent_prob;
    Grid<float> boundary_prob;
    Grid<float> distance;
    Grid<uint8_t> qa_codes;

    int step_px() const { return params.tile_size_px - params.overlap_px; }
    TileFrame tile_frame(int ti, int tj) const;
    ProbabilityTile probability_tile(int ti, int tj) const;
    QaTile qa_tile(int ti, int tj) const; // owned rect excludes overlap duplicates
};

SyntheticScene generate_scene(const SceneParams& params);

} // namespace fieldloom
