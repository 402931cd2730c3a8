#include "fieldloom/labels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fieldloom/csv.hpp"
#include "fieldloom/raster_io.hpp"
#include "fieldloom/raster_ops.hpp"

namespace fieldloom {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

std::vector<InstanceCandidate> select_pseudo_labels(std::vector<InstanceCandidate> candidates,
                                                    double top_fraction, double min_median_conf) {
    if (top_fraction <= 0.0 || top_fraction > 1.0)
        throw std::invalid_argument("select_pseudo_labels: top_fraction must be in (0,1]");
    if (candidates.empty()) return {};

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const InstanceCandidate& a, const InstanceCandidate& b) {
                         if (a.confidence != b.confidence) return a.confidence > b.confidence;
                         return a.id < b.id;
                     });
    size_t slots = static_cast<size_t>(std::ceil(top_fraction * candidates.size()));
    slots = std::min(slots, candidates.size());
    candidates.resize(slots);
    std::erase_if(candidates,
                  [min_median_conf](const InstanceCandidate& c) { return c.confidence < min_median_conf; });
    return candidates;
}

LabelRaster rasterize_labels(const std::vector<PolyGeom>& field_polygons,
                             const std::vector<PolyGeom>& noncrop_polygons, int tile_width,
                             int tile_height) {
    LabelRaster out;
    out.boundary = Grid<uint8_t>(tile_width, tile_height, LabelRaster::kUnlabeled);
    out.extent = Grid<uint8_t>(tile_width, tile_height, LabelRaster::kUnlabeled);
    out.distance = Grid<float>(tile_width, tile_height, LabelRaster::kUnlabeledDist);

    // field id per pixel: -1 unlabeled, -2 noncrop, >=0 field index
    Grid<int32_t> owner(tile_width, tile_height, -1);

    for (size_t fi = 0; fi < field_polygons.size(); ++fi) {
        for_each_covered_pixel(field_polygons[fi], [&](long long r, long long c) {
            if (r < 0 || r >= tile_height || c < 0 || c >= tile_width) return;
            int32_t& o = owner(static_cast<int>(r), static_cast<int>(c));
            if (o == -2)
                throw std::invalid_argument("rasterize_labels: field and non-crop labels overlap");
            o = static_cast<int32_t>(fi);
        });
    }
    for (const auto& poly : noncrop_polygons) {
        for_each_covered_pixel(poly, [&](long long r, long long c) {
            if (r < 0 || r >= tile_height || c < 0 || c >= tile_width) return;
            int32_t& o = owner(static_cast<int>(r), static_cast<int>(c));
            if (o >= 0)
                throw std::invalid_argument("rasterize_labels: field and non-crop labels overlap");
            o = -2;
        });
    }

    for (int r = 0; r < tile_height; ++r) {
        for (int c = 0; c < tile_width; ++c) {
            int32_t o = owner(r, c);
            if (o == -1) continue;
            if (o == -2) {
                out.extent(r, c) = 0;
                out.boundary(r, c) = 0;
                out.distance(r, c) = 0.0f;
                continue;
            }
            out.extent(r, c) = 1;
            bool outline = false;
            const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4 && !outline; ++k) {
                int nr = r + dr[k], nc = c + dc[k];
                if (!owner.in_bounds(nr, nc) || owner(nr, nc) != o) outline = true;
            }
            out.boundary(r, c) = outline ? 1 : 0;
        }
    }

    // Per-field normalized distance to the field's own outline pixels.
    for (size_t fi = 0; fi < field_polygons.size(); ++fi) {
        BBox box = geom_bbox(field_polygons[fi]);
        int r0 = std::max(0, static_cast<int>(std::floor(box.min_corner().y())));
        int c0 = std::max(0, static_cast<int>(std::floor(box.min_corner().x())));
        int r1 = std::min(tile_height, static_cast<int>(std::ceil(box.max_corner().y())) + 1);
        int c1 = std::min(tile_width, static_cast<int>(std::ceil(box.max_corner().x())) + 1);
        if (r0 >= r1 || c0 >= c1) continue;
        int bw = c1 - c0, bh = r1 - r0;

        Grid<uint8_t> sources(bw, bh, 0);
        bool any = false;
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
                if (owner(r, c) == static_cast<int32_t>(fi) && out.boundary(r, c) == 1) {
                    sources(r - r0, c - c0) = 1;
                    any = true;
                }
        if (!any) continue;
        Grid<float> dist = distance_to_sources(sources);

        float max_d = 0.0f;
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
                if (owner(r, c) == static_cast<int32_t>(fi))
                    max_d = std::max(max_d, dist(r - r0, c - c0));
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
                if (owner(r, c) == static_cast<int32_t>(fi))
                    out.distance(r, c) = max_d > 0 ? dist(r - r0, c - c0) / max_d : 0.0f;
    }
    return out;
}

std::vector<Chip> extract_chips(const LabelRaster& labels, const std::string& tile_id,
                                int chip_size) {
    if (chip_size <= 0) throw std::invalid_argument("extract_chips: chip_size must be positive");
    std::vector<Chip> out;
    const int nx = labels.extent.width / chip_size;
    const int ny = labels.extent.height / chip_size;
    for (int wy = 0; wy < ny; ++wy) {
        for (int wx = 0; wx < nx; ++wx) {
            Chip chip;
            chip.tile_id = tile_id;
            chip.window_x = wx * chip_size;
            chip.window_y = wy * chip_size;
            bool labeled = false;
            for (int r = chip.window_y; r < chip.window_y + chip_size; ++r) {
                for (int c = chip.window_x; c < chip.window_x + chip_size; ++c) {
                    uint8_t e = labels.extent(r, c);
                    if (e == LabelRaster::kUnlabeled) continue;
                    labeled = true;
                    if (e == 1) chip.has_field_pixels = true;
                    if (e == 0) chip.has_nonfield_pixels = true;
                    if (labels.boundary(r, c) == 1) chip.has_boundary_pixels = true;
                }
            }
            if (labeled) out.push_back(std::move(chip));
        }
    }
    return out;
}

std::vector<Chip> balance_chips(const std::vector<Chip>& chips, double removal_fraction,
                                uint64_t seed) {
    if (removal_fraction < 0.0 || removal_fraction >= 1.0)
        throw std::invalid_argument("balance_chips: removal_fraction must be in [0,1)");

    std::vector<size_t> target_idx;
    for (size_t i = 0; i < chips.size(); ++i)
        if (chips[i].has_nonfield_pixels && !chips[i].has_boundary_pixels) target_idx.push_back(i);

    size_t keep = static_cast<size_t>(std::llround((1.0 - removal_fraction) * target_idx.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(target_idx.begin(), target_idx.end(), rng);
    target_idx.resize(keep);
    std::vector<bool> kept(chips.size(), false);
    for (size_t i : target_idx) kept[i] = true;

    std::vector<Chip> out;
    out.reserve(chips.size());
    for (size_t i = 0; i < chips.size(); ++i) {
        if (chips[i].has_nonfield_pixels && !chips[i].has_boundary_pixels) {
            if (kept[i]) out.push_back(chips[i]);
        } else {
            out.push_back(chips[i]);
        }
    }
    return out;
}

ChipSplits split_chips(const std::vector<Chip>& chips, double f_train, double f_val, double f_test,
                       uint64_t seed) {
    if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw std::invalid_argument("split_chips: fractions must sum to 1");

    const size_t n = chips.size();
    size_t n_val = static_cast<size_t>(std::floor(f_val * n));
    size_t n_test = static_cast<size_t>(std::floor(f_test * n));
    size_t n_train = n - n_val - n_test; // remainder goes to train

    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    ChipSplits s;
    for (size_t i = 0; i < n; ++i) {
        const Chip& c = chips[idx[i]];
        if (i < n_train) s.train.push_back(c);
        else if (i < n_train + n_val) s.validation.push_back(c);
        else s.test.push_back(c);
    }
    return s;
}

void write_label_raster(const std::string& base_path, const LabelRaster& labels) {
    const int w = labels.extent.width, h = labels.extent.height;
    Grid<float> boundary(w, h), extent(w, h);
    for (size_t i = 0; i < labels.extent.size(); ++i) {
        boundary.data[i] = labels.boundary.data[i] == LabelRaster::kUnlabeled
                               ? LabelRaster::kUnlabeledDist
                               : static_cast<float>(labels.boundary.data[i]);
        extent.data[i] = labels.extent.data[i] == LabelRaster::kUnlabeled
                             ? LabelRaster::kUnlabeledDist
                             : static_cast<float>(labels.extent.data[i]);
    }
    RasterMeta meta;
    meta.nodata = LabelRaster::kUnlabeledDist;
    write_raster<float>(base_path, meta, {boundary, extent, labels.distance});
}

LabelRaster read_label_raster(const std::string& base_path) {
    auto raster = read_raster<float>(base_path);
    if (raster.meta.bands != 3)
        throw std::runtime_error("label raster " + base_path + ": expected 3 bands");
    const int w = raster.meta.width, h = raster.meta.height;
    LabelRaster out;
    out.boundary = Grid<uint8_t>(w, h);
    out.extent = Grid<uint8_t>(w, h);
    out.distance = std::move(raster.bands[2]);
    for (size_t i = 0; i < out.extent.size(); ++i) {
        float b = raster.bands[0].data[i], e = raster.bands[1].data[i];
        out.boundary.data[i] = b < 0 ? LabelRaster::kUnlabeled : static_cast<uint8_t>(b);
        out.extent.data[i] = e < 0 ? LabelRaster::kUnlabeled : static_cast<uint8_t>(e);
    }
    return out;
}

void write_chip_index_csv(const std::string& path, const ChipSplits& splits) {
    CsvTable t;
    t.header = {"tile_id", "window_x", "window_y", "split",
                "has_field", "has_boundary", "has_nonfield"};
    auto add = [&t](const std::vector<Chip>& chips, const char* split) {
        for (const Chip& c : chips)
            t.rows.push_back({c.tile_id, std::to_string(c.window_x), std::to_string(c.window_y),
                              split, c.has_field_pixels ? "1" : "0",
                              c.has_boundary_pixels ? "1" : "0",
                              c.has_nonfield_pixels ? "1" : "0"});
    };
    add(splits.train, "train");
    add(splits.validation, "validation");
    add(splits.test, "test");
    write_csv(path, t);
}

} // namespace fieldloom
