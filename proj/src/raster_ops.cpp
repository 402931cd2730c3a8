#include "fieldloom/raster_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fieldloom {

namespace {

constexpr float kFarAway = 1e20f;

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
void dt_1d(const std::vector<float>& f, std::vector<float>& d, int n) {
    static thread_local std::vector<int> v;
    static thread_local std::vector<float> z;
    v.assign(n, 0);
    z.assign(n + 1, 0.0f);
    int k = 0;
    v[0] = 0;
    z[0] = -kFarAway;
    z[1] = kFarAway;
    for (int q = 1; q < n; ++q) {
        float s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0f * q - 2.0f * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0f * q - 2.0f * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFarAway;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        float dq = static_cast<float>(q - v[k]);
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace

Grid<float> distance_to_sources(const Grid<uint8_t>& is_source) {
    const int w = is_source.width, h = is_source.height;
    Grid<float> sq(w, h, kFarAway);
    for (size_t i = 0; i < sq.size(); ++i)
        if (is_source.data[i]) sq.data[i] = 0.0f;

    std::vector<float> f(std::max(w, h)), d(std::max(w, h));
    // columns
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = sq(r, c);
        dt_1d(f, d, h);
        for (int r = 0; r < h; ++r) sq(r, c) = d[r];
    }
    // rows
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = sq(r, c);
        dt_1d(f, d, w);
        for (int c = 0; c < w; ++c) sq(r, c) = d[c];
    }
    for (auto& v : sq.data) v = std::sqrt(v);
    return sq;
}

void for_each_covered_pixel(const PolyGeom& poly,
                            const std::function<void(long long, long long)>& fn) {
    BBox box = geom_bbox(poly);
    long long r0 = static_cast<long long>(std::floor(box.min_corner().y()));
    long long r1 = static_cast<long long>(std::ceil(box.max_corner().y()));

    std::vector<double> xs;
    for (long long r = r0; r < r1; ++r) {
        double y = r + 0.5;
        xs.clear();
        auto scan_ring = [&](const auto& ring) {
            for (size_t i = 0; i + 1 < ring.size(); ++i) {
                double y0 = ring[i].y(), y1 = ring[i + 1].y();
                if ((y0 <= y && y < y1) || (y1 <= y && y < y0)) {
                    double x0 = ring[i].x(), x1 = ring[i + 1].x();
                    xs.push_back(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
                }
            }
        };
        scan_ring(poly.outer());
        for (const auto& inner : poly.inners()) scan_ring(inner);
        if (xs.size() < 2) continue;
        std::sort(xs.begin(), xs.end());
        for (size_t i = 0; i + 1 < xs.size(); i += 2) {
            long long c0 = static_cast<long long>(std::ceil(xs[i] - 0.5));
            long long c1 = static_cast<long long>(std::ceil(xs[i + 1] - 0.5));
            for (long long c = c0; c < c1; ++c) fn(r, c);
        }
    }
}

} // namespace fieldloom
