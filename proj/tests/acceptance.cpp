// Acceptance suite: runs every release criterion and prints one line per
// criterion. Exit code 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "fieldloom/evaluation.hpp"
#include "fieldloom/forest.hpp"
#include "fieldloom/grid_agg.hpp"
#include "fieldloom/merge.hpp"
#include "fieldloom/pipeline.hpp"
#include "fieldloom/qa.hpp"
#include "fieldloom/scene.hpp"
#include "fieldloom/segmentation.hpp"
#include "fieldloom/tile_grid.hpp"

using namespace fieldloom;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ------------------------------------------------------------------ 1 & 2 --

void criterion_1_and_2() {
    ProbMatrix p{{{0.8629, 0.0354}, {0.0395, 0.0621}}};
    std::array<double, 2> w{p[0][0] + p[0][1], p[1][0] + p[1][1]};

    auto t0 = Clock::now();
    AccuracyReport r = accuracy_estimates(p, w, {1206, 575});
    double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

    double oa = r.overall.value;
    double pa_crop = r.producer_accuracy[kCrop].value;
    double ua_noncrop = r.user_accuracy[kNonCrop].value;
    double area_crop = r.area_proportion[kCrop].value;

    bool ok = std::abs(oa - 0.9251) <= 0.0002 && std::abs(pa_crop - 0.6368) <= 0.0002 &&
              std::abs(ua_noncrop - 0.9606) <= 0.0002 && std::abs(area_crop - 0.0975) <= 0.0001 &&
              ms < 1.0;
    report(1, ok,
           fmt("confusion-matrix reproduction: OA=%.4f PA_crop=%.4f UA_noncrop=%.4f "
               "A_crop=%.4f (%.3f ms)",
               oa, pa_crop, ua_noncrop, area_crop, ms));

    double area_km2 = area_crop * 782477.0;
    report(2, std::abs(area_km2 - 76289.0) <= 10.0,
           fmt("error-adjusted cropland area: %.1f km2 (target 76289 +-10)", area_km2));
}

// ---------------------------------------------------------------------- 3 --

void criterion_3() {
    double mn = 1e300, mx = -1e300, sum = 0;
    int n = 0;
    for (double lat = -26.90; lat < -10.50 - 1e-9; lat += 0.05) {
        double a = cell_area_km2(lat);
        mn = std::min(mn, a);
        mx = std::max(mx, a);
        sum += a;
        ++n;
    }
    double mean = sum / n;
    bool ok = std::abs(mn / 27.54 - 1) < 0.01 && std::abs(mx / 30.26 - 1) < 0.01 &&
              std::abs(mean / 29.35 - 1) < 0.01;
    report(3, ok,
           fmt("cell areas 10.5S-26.9S: min %.2f / max %.2f / mean %.2f km2 "
               "(targets 27.54 / 30.26 / 29.35, 1%%)",
               mn, mx, mean));
}

// ---------------------------------------------------------------------- 4 --

void criterion_4() {
    TileGrid g = build_tile_grid({30.0, -20.0, 31.0, -19.0}, 0.0000135, 4096, 256);
    long long super_px = 3LL * g.tile_size_px - 2LL * g.overlap_px;
    double super_m = super_px * 1.5;
    bool ok = super_px == 11776 && super_m == 17664.0;
    report(4, ok, fmt("super-tile span: %lld px = %.0f m (target 11776 px = 17664 m)",
                      super_px, super_m));
}

// ------------------------------------------------------------------ 5 & 10 --

void criterion_5_and_10() {
    auto t0 = Clock::now();

    SceneParams sp;
    sp.seed = 20230501;
    sp.n_fields = 500;
    sp.noise_level = 0.1;
    sp.tiles_x = 3;
    sp.tiles_y = 3;
    sp.tile_size_px = 768;
    sp.overlap_px = 64;
    sp.cropland_cover = 0.55;
    sp.n_patches = 2;
    SyntheticScene scene = generate_scene(sp);

    SegmentationParams params;
    params.t_ext = 0.2;
    params.t_bnd = 0.2;
    params.min_instance_px = 4;

    std::vector<std::vector<TileSlot>> rows(sp.tiles_y);
    for (int tj = 0; tj < sp.tiles_y; ++tj) {
        for (int ti = 0; ti < sp.tiles_x; ++ti) {
            ProbabilityTile tile = scene.probability_tile(ti, tj);
            InstanceRaster inst = segment_tile(tile, params);
            TileFrame frame = scene.tile_frame(ti, tj);
            TileSlot slot;
            slot.rect = {static_cast<double>(frame.px_x), static_cast<double>(frame.px_y),
                         static_cast<double>(frame.px_x + frame.width),
                         static_cast<double>(frame.px_y + frame.height)};
            slot.polygons = polygonize(inst, frame);
            rows[tj].push_back(std::move(slot));
        }
    }
    MergeParams mp;
    mp.overlap_px = sp.overlap_px;
    auto blocks = merge_pass(rows, mp);
    std::vector<FieldPolygon> merged;
    for (auto& b : blocks) merged.insert(merged.end(), b.polygons.begin(), b.polygons.end());

    // ground truth comparison (filter off)
    const double truth_n = static_cast<double>(scene.truth_polygons.size());
    double truth_area = 0;
    for (const auto& p : scene.truth_polygons) truth_area += p.area_ha;
    double merged_area = 0;
    for (const auto& p : merged) merged_area += p.area_ha;

    std::vector<PolyGeom> ref_geoms, pred_geoms;
    for (const auto& p : scene.truth_polygons) ref_geoms.push_back(p.geom);
    for (const auto& p : merged) pred_geoms.push_back(p.geom);
    auto pairs = match_fields(ref_geoms, pred_geoms, kPixelAreaM2 / 1e4);
    ObjectMetrics om = object_metrics(pairs, pred_geoms.size());

    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    double count_err = std::abs(merged.size() - truth_n) / truth_n;
    double area_err = std::abs(merged_area - truth_area) / truth_area;

    bool ok = count_err <= 0.02 && area_err <= 0.01 && om.mean_iou >= 0.90 && secs < 60.0;
    report(5, ok,
           fmt("end-to-end synthetic scene: fields %zu/%.0f (%.2f%% err), area %.1f/%.1f ha "
               "(%.2f%% err), mean IoU %.3f, %.1f s",
               merged.size(), truth_n, 100 * count_err, merged_area, truth_area, 100 * area_err,
               om.mean_iou, secs));

    // criterion 10: aggregation conservation on the merged inventory
    AggGrid grid = make_agg_grid(scene.ref, scene.extent_x, scene.extent_y, 0.005);
    std::vector<QaTile> qa;
    for (int tj = 0; tj < sp.tiles_y; ++tj)
        for (int ti = 0; ti < sp.tiles_x; ++ti) qa.push_back(scene.qa_tile(ti, tj));
    auto cells = aggregate_cells(merged, qa, scene.ref, grid);

    double gridded_area_ha = 0;
    long long centroid_count = 0;
    for (const auto& c : cells) {
        gridded_area_ha += c.crop_pixels * kPixelAreaM2 / 1e4;
        centroid_count += c.n_fields;
    }
    double cons_err = std::abs(gridded_area_ha - merged_area) / merged_area;
    bool ok10 = cons_err <= 0.005 && centroid_count == static_cast<long long>(merged.size());
    report(10, ok10,
           fmt("aggregation conservation: gridded %.2f ha vs polygons %.2f ha (%.3f%%), "
               "centroids %lld vs %zu polygons",
               gridded_area_ha, merged_area, 100 * cons_err, centroid_count, merged.size()));
}

// ---------------------------------------------------------------------- 6 --

void criterion_6() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        double x0 = u(rng) * 100, y0 = u(rng) * 100;
        PolyGeom a = make_box_polygon(x0, y0, x0 + 1 + u(rng) * 30, y0 + 1 + u(rng) * 30);
        double x1 = u(rng) * 100, y1 = u(rng) * 100;
        PolyGeom b = make_box_polygon(x1, y1, x1 + 1 + u(rng) * 30, y1 + 1 + u(rng) * 30);

        double i_ab = iou(a, b), i_ba = iou(b, a);
        double dice = dice_from_iou(i_ab);
        double identity_err = std::abs(dice - 2.0 * i_ab / (1.0 + i_ab));
        double sym_err = std::abs(i_ab - i_ba);
        worst = std::max({worst, identity_err, sym_err});
        if (identity_err > 1e-12 || sym_err > 1e-12) ok = false;
    }
    report(6, ok, fmt("Dice = 2*IoU/(1+IoU) and IoU symmetry over 1000 pairs (worst dev %.2e)",
                      worst));
}

// ---------------------------------------------------------------------- 7 --

void criterion_7() {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    std::string first_fail;

    for (int trial = 0; trial < 200 && ok; ++trial) {
        // randomized pair of overlapping tiles with polygons scattered across
        // the seam
        const double tile = 120, overlap = 20;
        TileRect ta{0, 0, tile, tile}, tb{tile - overlap, 0, 2 * tile - overlap, tile};
        TileRect enclosing{0, 0, 2 * tile - overlap, tile};

        auto clip_square = [&](double x0, double y0, double side, double conf, const TileRect& rect,
                               const std::string& uid) {
            FieldPolygon p;
            p.uid = uid;
            double cx0 = std::max(x0, rect.x0), cy0 = std::max(y0, rect.y0);
            double cx1 = std::min(x0 + side, rect.x1), cy1 = std::min(y0 + side, rect.y1);
            if (cx1 - cx0 < 1 || cy1 - cy0 < 1) return p;
            p.geom = make_box_polygon(cx0, cy0, cx1, cy1);
            p.confidence = conf;
            p.area_ha = geom_area(p.geom) * kPixelAreaM2 / 1e4;
            return p;
        };

        std::vector<TileSlot> slots(2);
        slots[0].rect = ta;
        slots[1].rect = tb;
        std::vector<FieldPolygon> inputs;
        int n = 8 + static_cast<int>(u(rng) * 8);
        for (int i = 0; i < n; ++i) {
            double side = 6 + u(rng) * 30;
            double x0 = u(rng) * (enclosing.x1 - side);
            double y0 = u(rng) * (tile - side);
            double conf = 0.5 + 0.5 * u(rng);
            // each field is observed by every tile its extent intersects
            for (int s = 0; s < 2; ++s) {
                FieldPolygon p = clip_square(x0, y0, side, conf,
                                             s == 0 ? ta : tb,
                                             "f" + std::to_string(trial) + "_" +
                                                 std::to_string(i) + "_" + std::to_string(s));
                if (!p.uid.empty() && !bg::is_empty(p.geom)) {
                    slots[s].polygons.push_back(p);
                    inputs.push_back(p);
                }
            }
        }

        MergeParams mp{0.30, 9.0, overlap};
        std::vector<MergeEvent> events;
        auto out = merge_tiles(slots, enclosing, mp, &events);

        // pairwise disjoint
        for (size_t i = 0; i < out.size() && ok; ++i)
            for (size_t j = i + 1; j < out.size(); ++j) {
                double inter = intersection_area(out[i].geom, out[j].geom);
                double min_area = std::min(geom_area(out[i].geom), geom_area(out[j].geom));
                if (inter > 1e-9 * min_area) {
                    ok = false;
                    first_fail = fmt("trial %d: overlap ratio %.2e", trial, inter / min_area);
                    break;
                }
            }

        // idempotent
        auto again = merge_tiles({TileSlot{out, enclosing}}, enclosing, mp);
        if (ok && again.size() != out.size()) {
            ok = false;
            first_fail = fmt("trial %d: rerun changed polygon count %zu -> %zu", trial, out.size(),
                             again.size());
        }
        if (ok) {
            double a1 = 0, a2 = 0;
            for (const auto& p : out) a1 += geom_area(p.geom);
            for (const auto& p : again) a2 += geom_area(p.geom);
            if (std::abs(a1 - a2) > 1e-9 * std::max(a1, 1.0)) {
                ok = false;
                first_fail = fmt("trial %d: rerun changed total area", trial);
            }
        }

        // rule-A confidence monotonicity
        std::map<std::string, double> conf;
        for (const auto& p : inputs) conf[p.uid] = p.confidence;
        for (const auto& e : events) {
            if (e.rule != 'A') continue;
            if (conf.at(e.winner) < conf.at(e.loser)) {
                ok = false;
                first_fail = fmt("trial %d: rule A kept %.3f over %.3f", trial,
                                 conf.at(e.winner), conf.at(e.loser));
                break;
            }
        }
    }
    report(7, ok,
           ok ? "merge: idempotent, pairwise-disjoint, confidence-monotone on 200 fixtures"
              : "merge properties failed: " + first_fail);
}

// ---------------------------------------------------------------------- 8 --

void criterion_8() {
    // threshold edge behavior
    std::vector<FieldPolygon> polys(2);
    polys[0].uid = "low";
    polys[0].geom = make_box_polygon(0, 0, 10, 10);
    polys[0].field_prob = 0.59;
    polys[1].uid = "high";
    polys[1].geom = make_box_polygon(20, 0, 30, 10);
    polys[1].field_prob = 0.61;
    auto kept = apply_threshold(polys, 0.6);
    bool edge_ok = kept.size() == 1 && kept[0].uid == "high";

    // seed-deterministic training with perfect held-out separation
    std::vector<LabeledPolygonSample> train, test;
    for (int i = 0; i < 25; ++i) {
        LabeledPolygonSample lo, hi;
        lo.features.fill(0.0);
        hi.features.fill(0.0);
        lo.features[0] = 0.02 * i;
        lo.is_field = false;
        hi.features[0] = 0.6 + 0.015 * i;
        hi.is_field = true;
        train.push_back(lo);
        train.push_back(hi);
        lo.features[0] += 0.007;
        hi.features[0] += 0.007;
        test.push_back(lo);
        test.push_back(hi);
    }
    ForestModel m1 = train_forest(train, 250, 3, 99);
    ForestModel m2 = train_forest(train, 250, 3, 99);
    bool deterministic = true;
    int correct = 0;
    for (const auto& s : test) {
        double p1 = predict_field_probability(m1, s.features);
        double p2 = predict_field_probability(m2, s.features);
        if (p1 != p2) deterministic = false;
        if ((p1 >= 0.5) == s.is_field) ++correct;
    }
    bool holdout_ok = correct == static_cast<int>(test.size());
    report(8, edge_ok && deterministic && holdout_ok,
           fmt("forest filter: 0.59 removed / 0.61 retained (%s), deterministic (%s), "
               "held-out accuracy %d/%zu",
               edge_ok ? "yes" : "no", deterministic ? "yes" : "no", correct, test.size()));
}

// ---------------------------------------------------------------------- 9 --

void criterion_9() {
    // 100x100 tile: 2% nodata, 1% shadow, 3% cloud, 94% valid
    const int w = 100, h = 100;
    std::vector<Grid<uint8_t>> bands(4, Grid<uint8_t>(w, h, 120));
    auto set_px = [&](int idx, uint8_t v) {
        for (int b = 0; b < 4; ++b) bands[b].data[idx] = v;
    };
    int idx = 0;
    for (int k = 0; k < 200; ++k) set_px(idx++, 0);   // nodata
    for (int k = 0; k < 100; ++k) set_px(idx++, 5);   // shadow
    for (int k = 0; k < 300; ++k) set_px(idx++, 250); // cloud

    QaMask mask = qa_mask(bands);
    auto f = mask.fractions();
    bool ok = f[static_cast<int>(QaCode::nodata)] == 0.02 &&
              f[static_cast<int>(QaCode::shadow)] == 0.01 &&
              f[static_cast<int>(QaCode::cloud)] == 0.03 &&
              f[static_cast<int>(QaCode::valid)] == 0.94;
    report(9, ok,
           fmt("qa fractions: nodata %.4f shadow %.4f cloud %.4f valid %.4f (exact 0.02/0.01/"
               "0.03/0.94)",
               f[1], f[2], f[3], f[0]));
}

} // namespace

int main() {
    criterion_1_and_2();
    criterion_3();
    criterion_4();
    criterion_5_and_10();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();

    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
