#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldloom/geometry.hpp"
#include "fieldloom/grid.hpp"

namespace fieldloom {

struct InstanceCandidate {
    long long id = 0;
    PolyGeom geom;          // tile pixel coordinates
    double confidence = 0;  // median extent probability
};

// Sparse three-band training label. Bands 1/2 use kUnlabeled as the sentinel;
// the distance band uses kUnlabeledDist (valid values are in [0,1]).
struct LabelRaster {
    static constexpr uint8_t kUnlabeled = 255;
    static constexpr float kUnlabeledDist = -1.0f;

    Grid<uint8_t> boundary; // {0,1,kUnlabeled}
    Grid<uint8_t> extent;   // {0,1,kUnlabeled}
    Grid<float> distance;   // [0,1] or kUnlabeledDist
};

struct Chip {
    std::string tile_id;
    int window_x = 0; // pixel origin within the tile
    int window_y = 0;
    bool has_field_pixels = false;
    bool has_boundary_pixels = false;
    bool has_nonfield_pixels = false;
};

enum class Split { train, validation, test };
const char* split_name(Split s);

// The ceil(top_fraction*N) most confident candidates, minus any below
// min_median_conf, sorted by confidence descending.
std::vector<InstanceCandidate> select_pseudo_labels(std::vector<InstanceCandidate> candidates,
                                                    double top_fraction = 0.01,
                                                    double min_median_conf = 0.95);

LabelRaster rasterize_labels(const std::vector<PolyGeom>& field_polygons,
                             const std::vector<PolyGeom>& noncrop_polygons, int tile_width,
                             int tile_height);

// Non-overlapping chip_size windows over the label raster; trailing partial
// windows discarded; only windows containing at least one labeled pixel kept.
std::vector<Chip> extract_chips(const LabelRaster& labels, const std::string& tile_id,
                                int chip_size = 256);

std::vector<Chip> balance_chips(const std::vector<Chip>& chips, double removal_fraction,
                                uint64_t seed);

struct ChipSplits {
    std::vector<Chip> train;
    std::vector<Chip> validation;
    std::vector<Chip> test;
};

ChipSplits split_chips(const std::vector<Chip>& chips, double f_train, double f_val,
                       double f_test, uint64_t seed);

void write_chip_index_csv(const std::string& path, const ChipSplits& splits);

// Sidecar raster serialization: 3 float32 bands (boundary, extent, distance),
// unlabeled pixels as the nodata value -1.
void write_label_raster(const std::string& base_path, const LabelRaster& labels);
LabelRaster read_label_raster(const std::string& base_path);

} // namespace fieldloom
