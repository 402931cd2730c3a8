#include "fieldloom/merge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/geometry/index/rtree.hpp>

namespace fieldloom {

namespace {

constexpr double kEdgeEps = 1e-6;
constexpr double kAreaEps = 1e-9; // px^2; below this an "overlap" is float noise

struct Entry {
    FieldPolygon poly;
    TileRect own_rect;
    BBox bbox;
    bool alive = true;

    // border classification, refreshed when geometry or own_rect changes
    bool complete_own = true;
    bool b_drop = false;
    bool c_candidate = false;
};

void classify(Entry& e, const TileRect& enclosing, double overlap_px) {
    e.bbox = geom_bbox(e.poly.geom);
    const double bx0 = e.bbox.min_corner().x(), bx1 = e.bbox.max_corner().x();
    const double by0 = e.bbox.min_corner().y(), by1 = e.bbox.max_corner().y();
    const TileRect& r = e.own_rect;

    struct EdgeTest {
        bool touched;
        bool interior; // own-tile edge not on the enclosing border
        bool spans;    // reaches the inner border of the overlap strip
    };
    EdgeTest edges[4] = {
        {bx0 <= r.x0 + kEdgeEps, r.x0 > enclosing.x0 + kEdgeEps, bx1 >= r.x0 + overlap_px - kEdgeEps},
        {bx1 >= r.x1 - kEdgeEps, r.x1 < enclosing.x1 - kEdgeEps, bx0 <= r.x1 - overlap_px + kEdgeEps},
        {by0 <= r.y0 + kEdgeEps, r.y0 > enclosing.y0 + kEdgeEps, by1 >= r.y0 + overlap_px - kEdgeEps},
        {by1 >= r.y1 - kEdgeEps, r.y1 < enclosing.y1 - kEdgeEps, by0 <= r.y1 - overlap_px + kEdgeEps},
    };

    bool any_touched = false, any_interior_nonspanning = false, any_interior_touched = false;
    for (const auto& t : edges) {
        if (!t.touched) continue;
        any_touched = true;
        if (t.interior) {
            any_interior_touched = true;
            if (!t.spans) any_interior_nonspanning = true;
        }
    }
    e.complete_own = !any_touched;
    e.b_drop = any_interior_nonspanning;
    e.c_candidate = !e.complete_own && any_interior_touched && !any_interior_nonspanning;
    e.poly.complete = !(bx0 <= enclosing.x0 + kEdgeEps || bx1 >= enclosing.x1 - kEdgeEps ||
                        by0 <= enclosing.y0 + kEdgeEps || by1 >= enclosing.y1 - kEdgeEps);
}

// true if a should be removed in favor of b when they duplicate each other
bool loses_to(const Entry& a, const Entry& b) {
    if (a.poly.confidence != b.poly.confidence) return a.poly.confidence < b.poly.confidence;
    double aa = geom_area(a.poly.geom), ab = geom_area(b.poly.geom);
    if (aa != ab) return aa < ab;
    return a.poly.uid > b.poly.uid;
}

bool a_criteria_hold(const Entry& a, const Entry& b, double inter, double ratio_threshold) {
    double area_a = geom_area(a.poly.geom), area_b = geom_area(b.poly.geom);
    const Entry& smaller = area_a <= area_b ? a : b;
    const Entry& larger = area_a <= area_b ? b : a;
    if (point_in_polygon(geom_centroid(smaller.poly.geom), larger.poly.geom)) return true;
    double min_area = std::min(area_a, area_b);
    return min_area > 0 && inter / min_area > ratio_threshold;
}

using RtreeValue = std::pair<BBox, size_t>;
using Rtree = bg::index::rtree<RtreeValue, bg::index::quadratic<16>>;

std::vector<std::pair<size_t, size_t>> overlapping_pairs(const std::vector<Entry>& entries) {
    std::vector<RtreeValue> values;
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].alive) values.emplace_back(entries[i].bbox, i);
    Rtree tree(values.begin(), values.end());

    std::vector<std::pair<size_t, size_t>> pairs;
    std::vector<RtreeValue> hits;
    for (const auto& [box, i] : values) {
        hits.clear();
        tree.query(bg::index::intersects(box), std::back_inserter(hits));
        for (const auto& [obox, j] : hits)
            if (i < j) pairs.emplace_back(i, j);
    }
    // deterministic processing order
    std::sort(pairs.begin(), pairs.end(), [&entries](const auto& p, const auto& q) {
        const auto& pk = std::minmax(entries[p.first].poly.uid, entries[p.second].poly.uid);
        const auto& qk = std::minmax(entries[q.first].poly.uid, entries[q.second].poly.uid);
        return pk < qk;
    });
    return pairs;
}

} // namespace

std::vector<FieldPolygon> merge_tiles(const std::vector<TileSlot>& slots,
                                      const TileRect& enclosing, const MergeParams& params,
                                      std::vector<MergeEvent>* log) {
    auto record = [log](char rule, const std::string& winner, const std::string& loser) {
        if (log) log->push_back({rule, winner, loser});
    };
    // Structurally broken inputs are rejected per polygon, not escalated.
    // Self-touching rings (pinched instances) are legitimate tracer output
    // and pass through.
    auto structurally_broken = [](const PolyGeom& g) {
        if (bg::is_empty(g) || g.outer().size() < 4) return true;
        auto ring_ok = [](const Ring& r) {
            if (r.size() >= 4 && !bg::equals(r.front(), r.back())) return false;
            for (const auto& pt : r)
                if (!std::isfinite(pt.x()) || !std::isfinite(pt.y())) return false;
            return true;
        };
        if (!ring_ok(g.outer())) return true;
        for (const auto& inner : g.inners())
            if (!ring_ok(inner)) return true;
        return false;
    };

    std::vector<Entry> entries;
    for (const auto& slot : slots) {
        for (const auto& p : slot.polygons) {
            if (structurally_broken(p.geom)) {
                record('R', "", p.uid);
                continue;
            }
            Entry e;
            e.poly = p;
            e.own_rect = slot.rect;
            classify(e, enclosing, params.overlap_px);
            entries.push_back(std::move(e));
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.poly.uid < b.poly.uid; });

    const double sliver_px2 = params.min_sliver_m2 / kPixelAreaM2;

    bool changed = true;
    int guard = 0;
    while (changed) {
        if (++guard > 64) throw std::runtime_error("merge_tiles: rule loop failed to converge");
        changed = false;

        // Rule A: duplicated complete polygons
        for (const auto& [i, j] : overlapping_pairs(entries)) {
            Entry& a = entries[i];
            Entry& b = entries[j];
            if (!a.alive || !b.alive || !a.complete_own || !b.complete_own) continue;
            double inter = intersection_area(a.poly.geom, b.poly.geom);
            if (inter <= kAreaEps) continue;
            if (a_criteria_hold(a, b, inter, params.overlap_ratio)) {
                Entry& gone = loses_to(a, b) ? a : b;
                record('A', (&gone == &a ? b : a).poly.uid, gone.poly.uid);
                gone.alive = false;
                changed = true;
            }
        }

        // Rule B: incomplete polygons covered by a neighboring tile
        for (Entry& e : entries) {
            if (e.alive && e.b_drop) {
                record('B', "", e.poly.uid);
                e.alive = false;
                changed = true;
            }
        }

        // Rule C: dissolve polygons truncated on both sides of an overlap strip
        for (const auto& [i, j] : overlapping_pairs(entries)) {
            Entry& a = entries[i];
            Entry& b = entries[j];
            if (!a.alive || !b.alive || !a.c_candidate || !b.c_candidate) continue;
            double inter = intersection_area(a.poly.geom, b.poly.geom);
            if (inter <= kAreaEps) continue;
            if (!a_criteria_hold(a, b, inter, params.overlap_ratio)) continue;

            Entry& keep = loses_to(a, b) ? b : a;
            Entry& drop = loses_to(a, b) ? a : b;
            MultiPoly u = geom_union(keep.poly.geom, drop.poly.geom);
            keep.poly.geom = largest_part(u);
            keep.poly.confidence = std::max(a.poly.confidence, b.poly.confidence);
            keep.poly.area_ha = geom_area(keep.poly.geom) * kPixelAreaM2 / 1e4;
            // the dissolved object is trusted across the union of its source
            // tiles; it stays a dissolve candidate at seams it still crosses
            keep.own_rect = {std::min(keep.own_rect.x0, drop.own_rect.x0),
                             std::min(keep.own_rect.y0, drop.own_rect.y0),
                             std::max(keep.own_rect.x1, drop.own_rect.x1),
                             std::max(keep.own_rect.y1, drop.own_rect.y1)};
            classify(keep, enclosing, params.overlap_px);
            record('C', keep.poly.uid, drop.poly.uid);
            drop.alive = false;
            changed = true;
        }

        // Rule D: residual overlaps differenced out of the lower confidence
        for (const auto& [i, j] : overlapping_pairs(entries)) {
            Entry& a = entries[i];
            Entry& b = entries[j];
            if (!a.alive || !b.alive) continue;
            double inter = intersection_area(a.poly.geom, b.poly.geom);
            if (inter <= kAreaEps) continue;
            Entry& winner = loses_to(a, b) ? b : a;
            Entry& loser = loses_to(a, b) ? a : b;
            MultiPoly diff = geom_difference(loser.poly.geom, winner.poly.geom);
            record('D', winner.poly.uid, loser.poly.uid);
            PolyGeom part = largest_part(diff);
            if (geom_area(part) < sliver_px2) {
                loser.alive = false;
            } else {
                loser.poly.geom = std::move(part);
                loser.poly.area_ha = geom_area(loser.poly.geom) * kPixelAreaM2 / 1e4;
                classify(loser, enclosing, params.overlap_px);
            }
            changed = true;
        }
    }

    std::vector<FieldPolygon> out;
    for (Entry& e : entries)
        if (e.alive) out.push_back(std::move(e.poly));
    return out;
}

std::vector<FieldPolygon> merge_neighborhood(const std::vector<TileSlot>& nine_slots,
                                             const TileRect& super_tile_rect,
                                             const MergeParams& params) {
    if (nine_slots.size() > 9)
        throw std::invalid_argument("merge_neighborhood: expected at most 9 tile slots");
    return merge_tiles(nine_slots, super_tile_rect, params, nullptr);
}

std::vector<SuperTileSet> merge_pass(const std::vector<std::vector<TileSlot>>& tile_rows,
                                     const MergeParams& params) {
    if (tile_rows.empty() || tile_rows[0].empty()) return {};
    const int n_rows = static_cast<int>(tile_rows.size());
    const int n_cols = static_cast<int>(tile_rows[0].size());
    const int nbj = (n_rows + 2) / 3;
    const int nbi = (n_cols + 2) / 3;

    // Level 1: per-block 3x3 neighborhood merges.
    std::vector<SuperTileSet> blocks;
    for (int bj = 0; bj < nbj; ++bj) {
        for (int bi = 0; bi < nbi; ++bi) {
            std::vector<TileSlot> members;
            TileRect rect{1e300, 1e300, -1e300, -1e300};
            for (int dj = 0; dj < 3; ++dj) {
                for (int di = 0; di < 3; ++di) {
                    int tj = bj * 3 + dj, ti = bi * 3 + di;
                    if (tj >= n_rows || ti >= n_cols) continue;
                    const TileSlot& s = tile_rows[tj][ti];
                    rect.x0 = std::min(rect.x0, s.rect.x0);
                    rect.y0 = std::min(rect.y0, s.rect.y0);
                    rect.x1 = std::max(rect.x1, s.rect.x1);
                    rect.y1 = std::max(rect.y1, s.rect.y1);
                    members.push_back(s);
                }
            }
            SuperTileSet b;
            b.block_i = bi;
            b.block_j = bj;
            b.rect = rect;
            b.polygons = merge_neighborhood(members, rect, params);
            blocks.push_back(std::move(b));
        }
    }

    // Level 2: one seam pass across all super-tiles.
    TileRect aoi{1e300, 1e300, -1e300, -1e300};
    std::vector<TileSlot> block_slots;
    for (const auto& b : blocks) {
        aoi.x0 = std::min(aoi.x0, b.rect.x0);
        aoi.y0 = std::min(aoi.y0, b.rect.y0);
        aoi.x1 = std::max(aoi.x1, b.rect.x1);
        aoi.y1 = std::max(aoi.y1, b.rect.y1);
        block_slots.push_back({b.polygons, b.rect});
    }
    std::vector<FieldPolygon> merged = merge_tiles(block_slots, aoi, params);

    // Assign each polygon to the super-tile holding its centroid. Super-tile
    // interiors overlap by the strip width; use the non-overlapping core
    // (half-open) so the assignment is unique.
    for (auto& b : blocks) b.polygons.clear();
    const double step_x = blocks.size() > 1 && nbi > 1 ? blocks[1].rect.x0 - blocks[0].rect.x0
                                                       : aoi.width();
    const double step_y = nbj > 1 ? blocks[static_cast<size_t>(nbi)].rect.y0 - blocks[0].rect.y0
                                  : aoi.height();
    for (auto& p : merged) {
        GeoPoint c = geom_centroid(p.geom);
        int bi = std::clamp(static_cast<int>((c.x() - aoi.x0) / step_x), 0, nbi - 1);
        int bj = std::clamp(static_cast<int>((c.y() - aoi.y0) / step_y), 0, nbj - 1);
        blocks[static_cast<size_t>(bj) * nbi + bi].polygons.push_back(std::move(p));
    }
    return blocks;
}

void flag_waterways(std::vector<FieldPolygon>& polygons, const std::vector<Polyline>& waterways) {
    if (waterways.empty()) return;
    std::vector<std::pair<BBox, size_t>> values;
    for (size_t i = 0; i < waterways.size(); ++i) {
        BBox b;
        bg::envelope(waterways[i], b);
        values.emplace_back(b, i);
    }
    Rtree tree(values.begin(), values.end());
    std::vector<RtreeValue> hits;
    for (auto& p : polygons) {
        hits.clear();
        tree.query(bg::index::intersects(geom_bbox(p.geom)), std::back_inserter(hits));
        for (const auto& [box, i] : hits) {
            if (polyline_intersects(waterways[i], p.geom)) {
                p.waterway = true;
                break;
            }
        }
    }
}

} // namespace fieldloom
