#include "fieldloom/polygonize.hpp"

#include <algorithm>
#include <unordered_map>

namespace fieldloom {

namespace {

// Directed boundary edge between lattice vertices, instance interior on the
// right (screen orientation, y down). Vertices keyed as vy*(w+1)+vx.
struct TraceEdge {
    int64_t from;
    int64_t to;
    bool used = false;
};

struct InstanceOutline {
    std::vector<TraceEdge> edges;
    std::unordered_map<int64_t, int> first_out; // vertex -> first edge index
    std::unordered_map<int64_t, int> second_out; // pinch vertices only
};

int dir_of(int64_t from, int64_t to, int64_t vw) {
    int64_t d = to - from;
    if (d == 1) return 0;   // +x
    if (d == vw) return 1;  // +y
    if (d == -1) return 2;  // -x
    return 3;               // -y
}

// Turn preference away from the interior: left, straight, right.
// With interior on the right, left turn of direction d is (d + 3) % 4.
int pick_next(const InstanceOutline& o, int64_t vertex, int incoming_dir, int64_t vw) {
    int candidates[2] = {-1, -1};
    int n = 0;
    if (auto it = o.first_out.find(vertex); it != o.first_out.end()) candidates[n++] = it->second;
    if (auto it = o.second_out.find(vertex); it != o.second_out.end()) candidates[n++] = it->second;

    int best = -1, best_rank = 4;
    for (int k = 0; k < n; ++k) {
        const TraceEdge& e = o.edges[candidates[k]];
        if (e.used) continue;
        int d = dir_of(e.from, e.to, vw);
        int rank;
        int rel = (d - incoming_dir + 4) % 4;
        if (rel == 3) rank = 0;      // left
        else if (rel == 0) rank = 1; // straight
        else if (rel == 1) rank = 2; // right
        else continue;               // reverse; cannot happen for boundary edges
        if (rank < best_rank) {
            best_rank = rank;
            best = candidates[k];
        }
    }
    return best;
}

} // namespace

std::vector<FieldPolygon> polygonize(const InstanceRaster& instances, const TileFrame& frame) {
    const auto& ids = instances.ids;
    const int w = ids.width, h = ids.height;
    const int64_t vw = w + 1;
    const int32_t n_inst = instances.n_instances();

    std::vector<InstanceOutline> outlines(n_inst);
    std::vector<bool> touches_border(n_inst, false);

    auto add_edge = [&](int32_t id, int64_t from, int64_t to) {
        InstanceOutline& o = outlines[id - 1];
        int idx = static_cast<int>(o.edges.size());
        o.edges.push_back({from, to, false});
        if (!o.first_out.emplace(from, idx).second) o.second_out.emplace(from, idx);
    };

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int32_t id = ids(r, c);
            if (id == 0) continue;
            if (r == 0 || r == h - 1 || c == 0 || c == w - 1) touches_border[id - 1] = true;
            int64_t tl = static_cast<int64_t>(r) * vw + c; // top-left vertex
            if (r == 0 || ids(r - 1, c) != id) add_edge(id, tl, tl + 1);
            if (c == w - 1 || ids(r, c + 1) != id) add_edge(id, tl + 1, tl + 1 + vw);
            if (r == h - 1 || ids(r + 1, c) != id) add_edge(id, tl + 1 + vw, tl + vw);
            if (c == 0 || ids(r, c - 1) != id) add_edge(id, tl + vw, tl);
        }
    }

    std::vector<FieldPolygon> out;
    out.reserve(n_inst);

    for (int32_t inst = 1; inst <= n_inst; ++inst) {
        InstanceOutline& o = outlines[inst - 1];
        std::vector<Ring> exteriors, holes;
        std::vector<double> exterior_areas;

        for (size_t start = 0; start < o.edges.size(); ++start) {
            if (o.edges[start].used) continue;
            Ring ring;
            auto vertex_point = [&](int64_t v) {
                return GeoPoint(static_cast<double>(v % vw) + frame.px_x,
                                static_cast<double>(v / vw) + frame.px_y);
            };
            int cur = static_cast<int>(start);
            int last_dir = -1;
            double signed_area2 = 0; // 2x shoelace, pixel units
            ring.push_back(vertex_point(o.edges[start].from));
            // Walk until the chosen continuation is the starting edge.
            while (true) {
                TraceEdge& e = o.edges[cur];
                e.used = true;
                int d = dir_of(e.from, e.to, vw);
                double fx = static_cast<double>(e.from % vw), fy = static_cast<double>(e.from / vw);
                double tx = static_cast<double>(e.to % vw), ty = static_cast<double>(e.to / vw);
                signed_area2 += fx * ty - tx * fy;
                if (d == last_dir)
                    ring.back() = vertex_point(e.to); // extend the collinear run
                else
                    ring.push_back(vertex_point(e.to));
                last_dir = d;
                int next = pick_next(o, e.to, d, vw);
                if (next < 0 || next == static_cast<int>(start)) break;
                cur = next;
            }
            if (!bg::equals(ring.front(), ring.back())) ring.push_back(ring.front());
            if (ring.size() < 4) continue;
            // Positive shoelace in (x, y) = exterior with our edge orientation.
            if (signed_area2 > 0) {
                exteriors.push_back(std::move(ring));
                exterior_areas.push_back(signed_area2 / 2.0);
            } else {
                holes.push_back(std::move(ring)); // already cw, as boost wants for inners
            }
        }
        if (exteriors.empty()) continue;

        size_t primary = 0;
        for (size_t i = 1; i < exteriors.size(); ++i)
            if (exterior_areas[i] > exterior_areas[primary]) primary = i;

        auto make_polygon = [&](size_t ext_idx, bool attach_holes, int part) {
            FieldPolygon fp;
            fp.tile_id = frame.tile_id;
            fp.uid = frame.tile_id + "#" + std::to_string(inst) +
                     (part > 0 ? "p" + std::to_string(part) : "");
            fp.geom.outer() = exteriors[ext_idx];
            if (attach_holes)
                for (auto& hring : holes) fp.geom.inners().push_back(hring);
            bg::correct(fp.geom);
            fp.confidence = instances.confidences[inst - 1];
            fp.complete = !touches_border[inst - 1];
            double px = attach_holes ? static_cast<double>(instances.pixel_counts[inst - 1])
                                     : geom_area(fp.geom);
            fp.area_ha = px * kPixelAreaM2 / 1e4;
            return fp;
        };

        if (exteriors.size() == 1) {
            out.push_back(make_polygon(0, true, 0));
        } else {
            // Pinched instance split into lobes; keep every lobe so total area
            // is conserved. Holes go to the largest lobe.
            int part = 0;
            for (size_t i = 0; i < exteriors.size(); ++i) {
                FieldPolygon fp = make_polygon(i, i == primary, i == primary ? 0 : ++part);
                fp.area_ha = geom_area(fp.geom) * kPixelAreaM2 / 1e4;
                out.push_back(std::move(fp));
            }
        }
    }
    return out;
}

} // namespace fieldloom
