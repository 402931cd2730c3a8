#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "fieldloom/labels.hpp"

using namespace fieldloom;

namespace {

InstanceCandidate cand(long long id, double conf) {
    InstanceCandidate c;
    c.id = id;
    c.confidence = conf;
    return c;
}

bool oracle_outline(const Grid<int32_t>& owner, int r, int c) {
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
        int nr = r + dr[k], nc = c + dc[k];
        if (!owner.in_bounds(nr, nc) || owner(nr, nc) != owner(r, c)) return true;
    }
    return false;
}

// O(field * outline) distance oracle: nearest outline pixel of the same field.
double brute_distance(const Grid<int32_t>& owner, int r, int c) {
    double best = 1e300;
    for (int rr = 0; rr < owner.height; ++rr)
        for (int cc = 0; cc < owner.width; ++cc)
            if (owner(rr, cc) == owner(r, c) && oracle_outline(owner, rr, cc)) {
                double d = std::hypot(rr - r, cc - c);
                best = std::min(best, d);
            }
    return best;
}

} // namespace

TEST_CASE("select_pseudo_labels: top slots then confidence floor") {
    std::vector<InstanceCandidate> cands;
    for (int i = 0; i < 300; ++i) cands.push_back(cand(i, 0.5));
    cands[7] = cand(7, 0.99);
    cands[13] = cand(13, 0.96);
    cands[200] = cand(200, 0.93);

    auto sel = select_pseudo_labels(cands, 0.01, 0.95); // 3 slots
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].confidence == 0.99);
    CHECK(sel[1].confidence == 0.96);
}

TEST_CASE("select_pseudo_labels: all below floor yields empty set") {
    std::vector<InstanceCandidate> cands;
    for (int i = 0; i < 50; ++i) cands.push_back(cand(i, 0.90));
    CHECK(select_pseudo_labels(cands, 0.01, 0.95).empty());
    CHECK(select_pseudo_labels({}, 0.01, 0.95).empty());
}

TEST_CASE("select_pseudo_labels: slot bound and ordering properties") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<InstanceCandidate> cands;
        int n = 1 + static_cast<int>(u(rng) * 500);
        for (int i = 0; i < n; ++i) cands.push_back(cand(i, u(rng)));
        auto sel = select_pseudo_labels(cands, 0.01, 0.95);
        size_t slots = static_cast<size_t>(std::ceil(0.01 * n));
        CHECK(sel.size() <= slots);
        for (size_t i = 0; i < sel.size(); ++i) {
            CHECK(sel[i].confidence >= 0.95);
            if (i) CHECK(sel[i - 1].confidence >= sel[i].confidence);
        }
        // every selected confidence >= every rejected candidate's confidence
        double min_sel = sel.empty() ? 1.0 : sel.back().confidence;
        std::vector<double> all;
        for (const auto& c : cands) all.push_back(c.confidence);
        std::sort(all.rbegin(), all.rend());
        for (size_t i = sel.size(); i < std::min(slots, all.size()); ++i)
            CHECK(all[i] <= std::max(0.95, min_sel));
    }
}

TEST_CASE("rasterize_labels: 11x11 square field") {
    // square occupying pixels [2,13) x [2,13)
    PolyGeom field = make_box_polygon(2, 2, 13, 13);
    LabelRaster lr = rasterize_labels({field}, {}, 16, 16);

    CHECK(lr.extent(7, 7) == 1);
    CHECK(lr.boundary(2, 2) == 1);
    CHECK(lr.boundary(2, 7) == 1);
    CHECK(lr.boundary(7, 7) == 0);
    CHECK(lr.distance(7, 7) == doctest::Approx(1.0)); // center is the interior max
    CHECK(lr.distance(2, 7) == doctest::Approx(0.0)); // outline pixels at zero
    CHECK(lr.extent(0, 0) == LabelRaster::kUnlabeled);
    CHECK(lr.distance(0, 0) == LabelRaster::kUnlabeledDist);
}

TEST_CASE("rasterize_labels: empty input -> all unlabeled") {
    LabelRaster lr = rasterize_labels({}, {}, 8, 8);
    for (auto v : lr.extent.data) CHECK(v == LabelRaster::kUnlabeled);
    for (auto v : lr.boundary.data) CHECK(v == LabelRaster::kUnlabeled);
}

TEST_CASE("rasterize_labels: touching fields share a two-pixel boundary band") {
    // two fields meeting at x = 10 on a 20x20 grid
    PolyGeom left = make_box_polygon(2, 4, 10, 16);
    PolyGeom right = make_box_polygon(10, 4, 18, 16);
    LabelRaster lr = rasterize_labels({left, right}, {}, 20, 20);

    for (int r = 4; r < 16; ++r) {
        CHECK(lr.extent(r, 9) == 1);
        CHECK(lr.extent(r, 10) == 1);
        CHECK(lr.boundary(r, 9) == 1);  // left field's edge column
        CHECK(lr.boundary(r, 10) == 1); // right field's edge column
    }

    // distance band against the brute-force oracle
    Grid<int32_t> owner(20, 20, -1);
    for (int r = 4; r < 16; ++r) {
        for (int c = 2; c < 10; ++c) owner(r, c) = 0;
        for (int c = 10; c < 18; ++c) owner(r, c) = 1;
    }
    std::vector<std::pair<int, int>> probes = {{8, 5}, {10, 6}, {5, 13}, {12, 14}, {4, 2}};
    // per-field max for normalization
    double max_left = 0, max_right = 0;
    for (int r = 4; r < 16; ++r)
        for (int c = 2; c < 18; ++c) {
            if (owner(r, c) < 0) continue;
            double& mx = owner(r, c) == 0 ? max_left : max_right;
            mx = std::max(mx, brute_distance(owner, r, c));
        }
    for (auto [r, c] : probes) {
        double expect = brute_distance(owner, r, c) / (owner(r, c) == 0 ? max_left : max_right);
        CHECK(lr.distance(r, c) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("rasterize_labels: overlapping field and non-crop labels rejected") {
    PolyGeom field = make_box_polygon(2, 2, 10, 10);
    PolyGeom noncrop = make_box_polygon(8, 8, 14, 14);
    CHECK_THROWS_AS(rasterize_labels({field}, {noncrop}, 16, 16), std::invalid_argument);
}

TEST_CASE("extract_chips: window accounting") {
    PolyGeom field = make_box_polygon(10, 10, 40, 40);
    LabelRaster lr = rasterize_labels({field}, {}, 512, 512);
    auto chips = extract_chips(lr, "t", 256);
    REQUIRE(chips.size() == 1); // labels confined to the first window
    CHECK(chips[0].window_x == 0);
    CHECK(chips[0].has_field_pixels);
    CHECK(chips[0].has_boundary_pixels);
    CHECK_FALSE(chips[0].has_nonfield_pixels);

    LabelRaster empty = rasterize_labels({}, {}, 512, 512);
    CHECK(extract_chips(empty, "t", 256).empty());

    // every window labeled -> count bounded by the full window grid
    PolyGeom all = make_box_polygon(0, 0, 512, 512);
    LabelRaster full = rasterize_labels({all}, {}, 512, 512);
    CHECK(extract_chips(full, "t", 256).size() == 4);
}

TEST_CASE("balance_chips: removes 95% of non-field-only chips") {
    std::vector<Chip> chips(1000);
    for (auto& c : chips) c.has_nonfield_pixels = true;
    auto kept = balance_chips(chips, 0.95, 42);
    CHECK(kept.size() == 50);

    // chips with boundary pixels are never removed
    std::vector<Chip> mixed(100);
    for (int i = 0; i < 100; ++i) {
        mixed[i].has_nonfield_pixels = true;
        mixed[i].has_boundary_pixels = i < 30;
    }
    auto kept2 = balance_chips(mixed, 0.95, 1);
    long long with_boundary =
        std::count_if(kept2.begin(), kept2.end(), [](const Chip& c) { return c.has_boundary_pixels; });
    CHECK(with_boundary == 30);

    // no target chips -> unchanged
    std::vector<Chip> fields(10);
    for (auto& c : fields) c.has_field_pixels = true;
    CHECK(balance_chips(fields, 0.95, 7).size() == 10);
}

TEST_CASE("balance_chips: deterministic for a fixed seed") {
    std::vector<Chip> chips(200);
    for (int i = 0; i < 200; ++i) {
        chips[i].window_x = i;
        chips[i].has_nonfield_pixels = true;
    }
    auto a = balance_chips(chips, 0.95, 123);
    auto b = balance_chips(chips, 0.95, 123);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].window_x == b[i].window_x);
}

TEST_CASE("split_chips: floor sizes with remainder to train") {
    std::vector<Chip> chips(3253);
    auto s = split_chips(chips, 0.6, 0.2, 0.2, 9);
    CHECK(s.train.size() == 1953);
    CHECK(s.validation.size() == 650);
    CHECK(s.test.size() == 650);

    std::vector<Chip> ten(10);
    auto s10 = split_chips(ten, 0.6, 0.2, 0.2, 9);
    CHECK(s10.train.size() == 6);
    CHECK(s10.validation.size() == 2);
    CHECK(s10.test.size() == 2);
}

TEST_CASE("label raster sidecar round trip") {
    PolyGeom field = make_box_polygon(2, 2, 13, 13);
    PolyGeom noncrop = make_box_polygon(20, 20, 30, 30);
    LabelRaster lr = rasterize_labels({field}, {noncrop}, 32, 32);

    auto tmp = std::filesystem::temp_directory_path() / "fieldloom_labels_test";
    write_label_raster(tmp.string(), lr);
    LabelRaster back = read_label_raster(tmp.string());
    CHECK(back.boundary.data == lr.boundary.data);
    CHECK(back.extent.data == lr.extent.data);
    CHECK(back.distance.data == lr.distance.data);
    std::filesystem::remove(tmp.string() + ".bin");
    std::filesystem::remove(tmp.string() + ".json");
}

TEST_CASE("split_chips: disjoint partition covering the input") {
    std::vector<Chip> chips(137);
    for (int i = 0; i < 137; ++i) chips[i].window_x = i;
    auto s = split_chips(chips, 0.6, 0.2, 0.2, 4);
    std::vector<int> seen;
    for (const auto& c : s.train) seen.push_back(c.window_x);
    for (const auto& c : s.validation) seen.push_back(c.window_x);
    for (const auto& c : s.test) seen.push_back(c.window_x);
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen.size() == 137);
    for (int i = 0; i < 137; ++i) CHECK(seen[i] == i); // no duplicates, full cover

    CHECK_THROWS_AS(split_chips(chips, 0.5, 0.2, 0.2, 4), std::invalid_argument);
}
