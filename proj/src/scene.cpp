#include "fieldloom/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fieldloom/polygonize.hpp"
#include "fieldloom/raster_ops.hpp"

namespace fieldloom {

TileFrame SyntheticScene::tile_frame(int ti, int tj) const {
    TileFrame f;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "t%04d_%04d", ti, tj);
    f.tile_id = buf;
    f.px_x = static_cast<long long>(ti) * step_px();
    f.px_y = static_cast<long long>(tj) * step_px();
    f.width = params.tile_size_px;
    f.height = params.tile_size_px;
    return f;
}

namespace {

template <typename T>
Grid<T> slice(const Grid<T>& full, const TileFrame& f) {
    Grid<T> out(f.width, f.height);
    for (int r = 0; r < f.height; ++r)
        for (int c = 0; c < f.width; ++c)
            out(r, c) = full(static_cast<int>(f.px_y) + r, static_cast<int>(f.px_x) + c);
    return out;
}

struct PatchRect {
    double x0, y0, x1, y1;
    bool contains(int x, int y) const {
        return x + 0.5 >= x0 && x + 0.5 < x1 && y + 0.5 >= y0 && y + 0.5 < y1;
    }
};

} // namespace

ProbabilityTile SyntheticScene::probability_tile(int ti, int tj) const {
    TileFrame f = tile_frame(ti, tj);
    ProbabilityTile t;
    t.tile_id = f.tile_id;
    t.meta.width = f.width;
    t.meta.height = f.height;
    t.meta.bands = 3;
    t.meta.dtype = "float32";
    t.meta.geotransform = {ref.lon_of_x(static_cast<double>(f.px_x)), ref.pixel_size_deg, 0,
                           ref.lat_of_y(static_cast<double>(f.px_y)), 0, -ref.pixel_size_deg};
    t.extent_prob = slice(extent_prob, f);
    t.boundary_prob = slice(boundary_prob, f);
    t.distance = slice(distance, f);
    return t;
}

QaTile SyntheticScene::qa_tile(int ti, int tj) const {
    TileFrame f = tile_frame(ti, tj);
    QaTile q;
    q.frame = f;
    q.codes = slice(qa_codes, f);
    q.owned_x0 = static_cast<long long>(ti) * step_px();
    q.owned_y0 = static_cast<long long>(tj) * step_px();
    q.owned_x1 = ti == params.tiles_x - 1 ? extent_x : (ti + 1LL) * step_px();
    q.owned_y1 = tj == params.tiles_y - 1 ? extent_y : (tj + 1LL) * step_px();
    return q;
}

SyntheticScene generate_scene(const SceneParams& params) {
    if (params.n_fields < 0) throw std::invalid_argument("generate_scene: n_fields must be >= 0");
    if (params.noise_level < 0 || params.noise_level > 1)
        throw std::invalid_argument("generate_scene: noise_level must be in [0,1]");
    if (params.tile_size_px <= params.overlap_px)
        throw std::invalid_argument("generate_scene: tile size must exceed overlap");

    SyntheticScene s;
    s.params = params;
    const int step = params.tile_size_px - params.overlap_px;
    s.extent_x = params.tile_size_px + (params.tiles_x - 1) * step;
    s.extent_y = params.tile_size_px + (params.tiles_y - 1) * step;
    s.ref = GridRef{params.origin_lon, params.origin_lat, params.pixel_size_deg};

    const int w = s.extent_x, h = s.extent_y;
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Cropland patches: one per column slot, shrunk to hit the cover target.
    std::vector<PatchRect> patches;
    const int np = std::max(1, params.n_patches);
    const double shrink = std::sqrt(std::clamp(params.cropland_cover, 0.01, 1.0));
    for (int k = 0; k < np; ++k) {
        double cell_w = static_cast<double>(w) / np;
        double pw = cell_w * shrink, ph = h * shrink;
        double x0 = k * cell_w + unit(rng) * (cell_w - pw);
        double y0 = unit(rng) * (h - ph);
        patches.push_back({x0, y0, x0 + pw, y0 + ph});
    }
    auto patch_of = [&patches](int x, int y) {
        for (size_t k = 0; k < patches.size(); ++k)
            if (patches[k].contains(x, y)) return static_cast<int>(k);
        return -1;
    };

    // Jittered-grid seeds inside the patches guarantee a minimum spacing, so
    // every Voronoi cell is chunky and connected.
    double patch_area = 0;
    for (const auto& p : patches) patch_area += (p.x1 - p.x0) * (p.y1 - p.y0);
    struct Seed {
        double x, y;
        int patch;
    };
    std::vector<Seed> seeds;
    double pitch = 1.0;
    if (params.n_fields > 0) {
        pitch = std::sqrt(patch_area / params.n_fields);
        for (size_t k = 0; k < patches.size(); ++k) {
            const PatchRect& p = patches[k];
            // ceil guarantees at least n_fields candidates overall
            int gx = std::max(1, static_cast<int>(std::ceil((p.x1 - p.x0) / pitch)));
            int gy = std::max(1, static_cast<int>(std::ceil((p.y1 - p.y0) / pitch)));
            double sx = (p.x1 - p.x0) / gx, sy = (p.y1 - p.y0) / gy;
            for (int j = 0; j < gy; ++j)
                for (int i = 0; i < gx; ++i)
                    seeds.push_back({p.x0 + (i + 0.5 + 0.6 * (unit(rng) - 0.5)) * sx,
                                     p.y0 + (j + 0.5 + 0.6 * (unit(rng) - 0.5)) * sy,
                                     static_cast<int>(k)});
        }
        if (static_cast<int>(seeds.size()) > params.n_fields) {
            std::shuffle(seeds.begin(), seeds.end(), rng);
            seeds.resize(params.n_fields);
        }
    }

    // Discrete Voronoi via bucketed nearest-seed lookup.
    s.truth_ids = Grid<int32_t>(w, h, 0);
    if (!seeds.empty()) {
        std::vector<int> patch_seed_count(patches.size(), 0);
        for (const Seed& sd : seeds) ++patch_seed_count[sd.patch];
        const double bucket = pitch;
        const int bw = static_cast<int>(w / bucket) + 2, bh = static_cast<int>(h / bucket) + 2;
        std::vector<std::vector<int>> buckets(static_cast<size_t>(bw) * bh);
        for (size_t i = 0; i < seeds.size(); ++i) {
            int bx = std::clamp(static_cast<int>(seeds[i].x / bucket), 0, bw - 1);
            int by = std::clamp(static_cast<int>(seeds[i].y / bucket), 0, bh - 1);
            buckets[static_cast<size_t>(by) * bw + bx].push_back(static_cast<int>(i));
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int patch = patch_of(x, y);
                if (patch < 0 || patch_seed_count[patch] == 0) continue;
                int bx = std::clamp(static_cast<int>((x + 0.5) / bucket), 0, bw - 1);
                int by = std::clamp(static_cast<int>((y + 0.5) / bucket), 0, bh - 1);
                int best = -1;
                double best_d = 1e300;
                for (int ring = 1; ring <= std::max(bw, bh); ++ring) {
                    for (int dy = -ring; dy <= ring; ++dy) {
                        int yy = by + dy;
                        if (yy < 0 || yy >= bh) continue;
                        for (int dx = -ring; dx <= ring; ++dx) {
                            int xx = bx + dx;
                            if (xx < 0 || xx >= bw) continue;
                            for (int si : buckets[static_cast<size_t>(yy) * bw + xx]) {
                                if (seeds[si].patch != patch) continue;
                                double ddx = seeds[si].x - (x + 0.5), ddy = seeds[si].y - (y + 0.5);
                                double d = ddx * ddx + ddy * ddy;
                                if (d < best_d || (d == best_d && si < best)) {
                                    best_d = d;
                                    best = si;
                                }
                            }
                        }
                    }
                    // One extra ring after the first hit makes the nearest
                    // seed exact despite bucket-boundary effects.
                    if (best >= 0 && ring >= static_cast<int>(std::sqrt(best_d) / bucket) + 1) break;
                }
                s.truth_ids(y, x) = best + 1;
            }
        }
    }

    // Ground-truth polygons via the production tracer; confidence 1.
    {
        std::vector<int64_t> counts;
        int32_t max_id = 0;
        for (int32_t v : s.truth_ids.data) max_id = std::max(max_id, v);
        counts.assign(max_id, 0);
        for (int32_t v : s.truth_ids.data)
            if (v > 0) ++counts[v - 1];

        // Compact away ids that ended up with zero pixels (possible when a
        // seed lies outside its own rounded pixel cell).
        std::vector<int32_t> remap(max_id + 1, 0);
        int32_t next = 0;
        for (int32_t v = 1; v <= max_id; ++v)
            if (counts[v - 1] > 0) remap[v] = ++next;
        InstanceRaster truth;
        truth.ids = s.truth_ids;
        for (auto& v : truth.ids.data) v = v > 0 ? remap[v] : 0;
        s.truth_ids = truth.ids;
        truth.pixel_counts.assign(next, 0);
        for (int32_t v : truth.ids.data)
            if (v > 0) ++truth.pixel_counts[v - 1];
        truth.confidences.assign(next, 1.0);

        TileFrame whole;
        whole.tile_id = "truth";
        whole.px_x = 0;
        whole.px_y = 0;
        whole.width = w;
        whole.height = h;
        s.truth_polygons = polygonize(truth, whole);
    }

    // Indicator rasters.
    Grid<uint8_t> outline(w, h, 0);
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int32_t id = s.truth_ids(y, x);
            if (id == 0) continue;
            for (int k = 0; k < 4; ++k) {
                int ny = y + dr[k], nx = x + dc[k];
                if (!s.truth_ids.in_bounds(ny, nx) || s.truth_ids(ny, nx) != id) {
                    outline(y, x) = 1;
                    break;
                }
            }
        }
    }

    s.extent_prob = Grid<float>(w, h, 0.0f);
    s.boundary_prob = Grid<float>(w, h, 0.0f);
    s.distance = Grid<float>(w, h, 0.0f);
    for (size_t i = 0; i < s.extent_prob.size(); ++i) {
        s.extent_prob.data[i] = s.truth_ids.data[i] > 0 ? 1.0f : 0.0f;
        s.boundary_prob.data[i] = outline.data[i] ? 1.0f : 0.0f;
    }

    // Per-field normalized distance to the field outline.
    {
        int32_t max_id = 0;
        for (int32_t v : s.truth_ids.data) max_id = std::max(max_id, v);
        std::vector<int> x0(max_id + 1, w), y0(max_id + 1, h), x1(max_id + 1, 0), y1(max_id + 1, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int32_t id = s.truth_ids(y, x);
                if (id == 0) continue;
                x0[id] = std::min(x0[id], x);
                y0[id] = std::min(y0[id], y);
                x1[id] = std::max(x1[id], x + 1);
                y1[id] = std::max(y1[id], y + 1);
            }
        for (int32_t id = 1; id <= max_id; ++id) {
            if (x0[id] >= x1[id]) continue;
            int bw = x1[id] - x0[id], bh = y1[id] - y0[id];
            Grid<uint8_t> sources(bw, bh, 0);
            for (int y = y0[id]; y < y1[id]; ++y)
                for (int x = x0[id]; x < x1[id]; ++x)
                    if (s.truth_ids(y, x) == id && outline(y, x)) sources(y - y0[id], x - x0[id]) = 1;
            Grid<float> d = distance_to_sources(sources);
            float max_d = 0;
            for (int y = y0[id]; y < y1[id]; ++y)
                for (int x = x0[id]; x < x1[id]; ++x)
                    if (s.truth_ids(y, x) == id) max_d = std::max(max_d, d(y - y0[id], x - x0[id]));
            if (max_d <= 0) continue;
            for (int y = y0[id]; y < y1[id]; ++y)
                for (int x = x0[id]; x < x1[id]; ++x)
                    if (s.truth_ids(y, x) == id)
                        s.distance(y, x) = d(y - y0[id], x - x0[id]) / max_d;
        }
    }

    // Blend with uniform noise.
    if (params.noise_level > 0) {
        const float a = static_cast<float>(params.noise_level);
        std::mt19937_64 noise_rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (auto& v : s.extent_prob.data) v = (1.0f - a) * v + a * u(noise_rng);
        for (auto& v : s.boundary_prob.data) v = (1.0f - a) * v + a * u(noise_rng);
        for (auto& v : s.distance.data) v = std::clamp((1.0f - a) * v + a * u(noise_rng), 0.0f, 1.0f);
    }

    // QA layer: valid except an optional random cloud fraction.
    s.qa_codes = Grid<uint8_t>(w, h, static_cast<uint8_t>(QaCode::valid));
    if (params.masked_fraction > 0) {
        std::mt19937_64 qa_rng(params.seed ^ 0xda942042e4dd58b5ULL);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& v : s.qa_codes.data)
            if (u(qa_rng) < params.masked_fraction) v = static_cast<uint8_t>(QaCode::cloud);
    }
    return s;
}

} // namespace fieldloom
