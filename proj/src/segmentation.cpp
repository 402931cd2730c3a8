#include "fieldloom/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

#include "fieldloom/csv.hpp"
#include "fieldloom/raster_ops.hpp"

namespace fieldloom {

namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

double median_of(std::vector<float>& values) {
    if (values.empty()) return 0.0;
    size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

struct QueueEntry {
    float elevation;
    int64_t index; // row-major pixel index; unique per entry
    bool operator>(const QueueEntry& o) const {
        if (elevation != o.elevation) return elevation > o.elevation;
        return index > o.index;
    }
};

} // namespace

InstanceRaster segment_tile(const ProbabilityTile& tile, const SegmentationParams& params) {
    const int w = tile.extent_prob.width, h = tile.extent_prob.height;
    if (tile.boundary_prob.width != w || tile.boundary_prob.height != h ||
        tile.distance.width != w || tile.distance.height != h)
        throw std::invalid_argument("segment_tile: probability raster dimension mismatch");

    const auto& ext = tile.extent_prob;
    const auto& bnd = tile.boundary_prob;

    auto in_mask = [&](int64_t i) { return ext.data[i] >= params.t_ext; };
    auto is_seed_material = [&](int64_t i) {
        if (!in_mask(i)) return false;
        if (params.seed_strategy == SeedStrategy::low_boundary)
            return bnd.data[i] < params.t_bnd;
        return tile.distance.data[i] >= params.distance_seed_threshold;
    };

    InstanceRaster out;
    out.ids = Grid<int32_t>(w, h, 0);
    auto& ids = out.ids;

    // Seeds: 4-connected components of the seed material, labeled in
    // row-major discovery order.
    int32_t next_id = 0;
    std::vector<int64_t> stack;
    for (int64_t i = 0; i < static_cast<int64_t>(ids.size()); ++i) {
        if (ids.data[i] != 0 || !is_seed_material(i)) continue;
        ++next_id;
        ids.data[i] = next_id;
        stack.assign(1, i);
        while (!stack.empty()) {
            int64_t cur = stack.back();
            stack.pop_back();
            int r = static_cast<int>(cur / w), c = static_cast<int>(cur % w);
            for (int k = 0; k < 4; ++k) {
                int nr = r + kDr[k], nc = c + kDc[k];
                if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                int64_t ni = static_cast<int64_t>(nr) * w + nc;
                if (ids.data[ni] == 0 && is_seed_material(ni)) {
                    ids.data[ni] = next_id;
                    stack.push_back(ni);
                }
            }
        }
    }

    // Flood the remaining mask over the boundary-probability surface. A pixel
    // is claimed by the first front that reaches it; the queue pops fronts in
    // (elevation, row-major index) order, so the result is deterministic.
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<QueueEntry>> queue;
    auto push_unclaimed_neighbors = [&](int64_t i) {
        int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
        for (int k = 0; k < 4; ++k) {
            int nr = r + kDr[k], nc = c + kDc[k];
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            int64_t ni = static_cast<int64_t>(nr) * w + nc;
            if (ids.data[ni] == 0 && in_mask(ni)) {
                ids.data[ni] = ids.data[i];
                queue.push({bnd.data[ni], ni});
            }
        }
    };
    for (int64_t i = 0; i < static_cast<int64_t>(ids.size()); ++i)
        if (ids.data[i] != 0) push_unclaimed_neighbors(i);
    while (!queue.empty()) {
        int64_t i = queue.top().index;
        queue.pop();
        push_unclaimed_neighbors(i);
    }

    // Drop undersized instances, renumber contiguously in row-major first-pixel
    // order, and collect per-instance stats.
    std::vector<int64_t> counts(next_id + 1, 0);
    for (int32_t v : ids.data) ++counts[v];
    std::vector<int32_t> remap(next_id + 1, 0);
    int32_t compact = 0;
    for (int64_t i = 0; i < static_cast<int64_t>(ids.size()); ++i) {
        int32_t v = ids.data[i];
        if (v == 0) continue;
        if (counts[v] < params.min_instance_px) {
            ids.data[i] = 0;
            continue;
        }
        if (remap[v] == 0) remap[v] = ++compact;
        ids.data[i] = remap[v];
    }

    out.pixel_counts.assign(compact, 0);
    std::vector<std::vector<float>> ext_values(compact);
    for (int64_t i = 0; i < static_cast<int64_t>(ids.size()); ++i) {
        int32_t v = ids.data[i];
        if (v == 0) continue;
        ++out.pixel_counts[v - 1];
        ext_values[v - 1].push_back(ext.data[i]);
    }
    out.confidences.resize(compact);
    for (int32_t k = 0; k < compact; ++k) out.confidences[k] = median_of(ext_values[k]);
    return out;
}

namespace {

// Pixel-level best-match IoU of each reference field against predicted
// instances (max-IoU matching, same rule the polygon evaluation uses).
void reference_ious(const InstanceRaster& predicted, const std::vector<PolyGeom>& reference,
                    int w, int h, std::vector<double>& ious_out) {
    for (const auto& ref : reference) {
        std::map<int32_t, int64_t> overlap;
        int64_t ref_px = 0;
        for_each_covered_pixel(ref, [&](long long r, long long c) {
            if (r < 0 || r >= h || c < 0 || c >= w) return;
            ++ref_px;
            int32_t id = predicted.ids(static_cast<int>(r), static_cast<int>(c));
            if (id > 0) ++overlap[id];
        });
        double best = 0.0;
        for (const auto& [id, inter] : overlap) {
            double uni = static_cast<double>(ref_px) + predicted.pixel_counts[id - 1] - inter;
            if (uni > 0) best = std::max(best, inter / uni);
        }
        ious_out.push_back(ref_px > 0 ? best : 0.0);
    }
}

} // namespace

GridSearchResult grid_search(const std::vector<ReferenceTile>& tiles,
                             const std::vector<double>& t_ext_candidates,
                             const std::vector<double>& t_bnd_candidates,
                             const SegmentationParams& base) {
    if (t_ext_candidates.empty() || t_bnd_candidates.empty())
        throw std::invalid_argument("grid_search: candidate lists must be non-empty");
    size_t n_ref = 0;
    for (const auto& t : tiles) n_ref += t.reference_fields.size();
    if (n_ref == 0) throw std::invalid_argument("grid_search: no reference fields");

    GridSearchResult result;
    bool first = true;
    for (double te : t_ext_candidates) {
        for (double tb : t_bnd_candidates) {
            SegmentationParams p = base;
            p.t_ext = te;
            p.t_bnd = tb;
            std::vector<double> ious;
            for (const auto& rt : tiles) {
                InstanceRaster inst = segment_tile(rt.tile, p);
                reference_ious(inst, rt.reference_fields, rt.tile.extent_prob.width,
                               rt.tile.extent_prob.height, ious);
            }
            GridSearchCell cell;
            cell.t_ext = te;
            cell.t_bnd = tb;
            double sum = 0;
            int above50 = 0;
            for (double v : ious) {
                sum += v;
                if (v > 0.5) ++above50;
            }
            cell.mean_iou = sum / static_cast<double>(ious.size());
            cell.iou50 = above50 / static_cast<double>(ious.size());
            result.surface.push_back(cell);

            // argmax; ties broken by lower t_ext then lower t_bnd
            bool better = cell.mean_iou > result.best_mean_iou;
            bool tie = cell.mean_iou == result.best_mean_iou &&
                       (te < result.best.t_ext ||
                        (te == result.best.t_ext && tb < result.best.t_bnd));
            if (first || better || tie) {
                result.best = p;
                result.best_mean_iou = cell.mean_iou;
                first = false;
            }
        }
    }
    return result;
}

void write_grid_search_csv(const std::string& path, const GridSearchResult& result) {
    CsvTable t;
    t.header = {"t_ext", "t_bnd", "mean_iou", "iou50"};
    char buf[64];
    for (const auto& c : result.surface) {
        std::vector<std::string> row;
        std::snprintf(buf, sizeof(buf), "%.4f", c.t_ext);
        row.emplace_back(buf);
        std::snprintf(buf, sizeof(buf), "%.4f", c.t_bnd);
        row.emplace_back(buf);
        std::snprintf(buf, sizeof(buf), "%.6f", c.mean_iou);
        row.emplace_back(buf);
        std::snprintf(buf, sizeof(buf), "%.6f", c.iou50);
        row.emplace_back(buf);
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

} // namespace fieldloom
