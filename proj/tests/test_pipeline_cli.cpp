#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fieldloom/csv.hpp"
#include "fieldloom/evaluation.hpp"
#include "fieldloom/geojson.hpp"
#include "fieldloom/pipeline.hpp"
#include "fieldloom/scene.hpp"
#include "fieldloom/segmentation.hpp"

using namespace fieldloom;
namespace fs = std::filesystem;

namespace {

SceneParams small_scene(uint64_t seed, int n_fields, double noise) {
    SceneParams p;
    p.seed = seed;
    p.n_fields = n_fields;
    p.noise_level = noise;
    p.tiles_x = 1;
    p.tiles_y = 1;
    p.tile_size_px = 200;
    p.overlap_px = 32;
    return p;
}

PipelineConfig tiny_config(const std::string& workdir, uint64_t scene_seed = 5) {
    PipelineConfig cfg;
    cfg.j = {
        {"workdir", workdir},
        {"workers", 2},
        {"scene",
         {{"seed", scene_seed}, {"n_fields", 16}, {"noise_level", 0.1}, {"tiles_x", 2},
          {"tiles_y", 2}, {"tile_size_px", 160}, {"overlap_px", 32}, {"cropland_cover", 0.55},
          {"n_patches", 1}}},
        {"segmentation", {{"t_ext", 0.2}, {"t_bnd", 0.2}, {"min_instance_px", 4}}},
        {"filter", {{"enabled", false}}},
        {"aggregate", {{"cell_size_deg", 0.001}}},
    };
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("generate_scene: deterministic and consistent with its parameters") {
    SyntheticScene a = generate_scene(small_scene(42, 30, 0.1));
    SyntheticScene b = generate_scene(small_scene(42, 30, 0.1));
    CHECK(a.truth_ids.data == b.truth_ids.data);
    CHECK(a.extent_prob.data == b.extent_prob.data);
    CHECK(a.truth_polygons.size() == b.truth_polygons.size());
    CHECK(a.truth_polygons.size() == 30);

    SyntheticScene c = generate_scene(small_scene(43, 30, 0.1));
    CHECK(a.extent_prob.data != c.extent_prob.data);
}

TEST_CASE("generate_scene: zero fields means empty extent") {
    SyntheticScene s = generate_scene(small_scene(1, 0, 0.0));
    CHECK(s.truth_polygons.empty());
    for (float v : s.extent_prob.data) CHECK(v == 0.0f);
}

TEST_CASE("generate_scene: probability rasters match ground truth at zero noise") {
    SyntheticScene s = generate_scene(small_scene(7, 25, 0.0));
    for (size_t i = 0; i < s.extent_prob.size(); ++i) {
        CHECK(s.extent_prob.data[i] == (s.truth_ids.data[i] > 0 ? 1.0f : 0.0f));
        CHECK((s.boundary_prob.data[i] == 0.0f || s.boundary_prob.data[i] == 1.0f));
        CHECK(s.distance.data[i] >= 0.0f);
        CHECK(s.distance.data[i] <= 1.0f);
    }
}

TEST_CASE("generate_scene: reported field sizes equal traced polygon areas") {
    SyntheticScene s = generate_scene(small_scene(3, 20, 0.1));
    double truth_total = 0;
    long long px_total = 0;
    for (const auto& p : s.truth_polygons) {
        truth_total += p.area_ha;
        CHECK(p.area_ha ==
              doctest::Approx(geom_area(p.geom) * kPixelAreaM2 / 1e4).epsilon(0.005));
    }
    for (int32_t v : s.truth_ids.data) px_total += v > 0 ? 1 : 0;
    CHECK(truth_total == doctest::Approx(px_total * kPixelAreaM2 / 1e4).epsilon(0.005));
}

TEST_CASE("zero-noise scene is recovered field-for-field by the watershed") {
    SceneParams sp = small_scene(19, 6, 0.0);
    sp.tile_size_px = 384; // chunky cells: ridge-plateau splits stay within tolerance
    SyntheticScene s = generate_scene(sp);
    ProbabilityTile t = s.probability_tile(0, 0);
    SegmentationParams params;
    params.t_ext = 0.2;
    params.t_bnd = 0.2;
    InstanceRaster inst = segment_tile(t, params);
    CHECK(inst.n_instances() == static_cast<int32_t>(s.truth_polygons.size()));

    auto polys = polygonize(inst, s.tile_frame(0, 0));
    std::vector<PolyGeom> pred, ref;
    for (const auto& p : polys) pred.push_back(p.geom);
    for (const auto& p : s.truth_polygons) ref.push_back(p.geom);
    auto pairs = match_fields(ref, pred, kPixelAreaM2 / 1e4);
    for (const auto& pr : pairs) CHECK(pr.iou >= 0.95);
}

TEST_CASE("pipeline stages chain, rerun byte-identically, and gate on dependencies") {
    TempDir tmp("fieldloom_pipe_test");
    PipelineConfig cfg = tiny_config(tmp.path.string());

    // dependency order is enforced
    CHECK_THROWS_AS(run_stage("merge", cfg), MissingDependencyError);

    // parameter validation precedes dependency checks
    PipelineConfig bad = tiny_config(tmp.path.string());
    apply_override(bad, "segmentation.t_ext=1.5");
    CHECK_THROWS_AS(run_stage("segment", bad), std::invalid_argument);

    run_stage("scene", cfg);
    run_stage("segment", cfg);
    run_stage("merge", cfg);
    run_stage("filter", cfg);
    run_stage("evaluate", cfg);
    run_stage("aggregate", cfg);

    const std::string w = tmp.path.string();
    for (const char* f :
         {"/scene/layout.json", "/scene/truth.geojson", "/segment/t0000_0000_inst.bin",
          "/merge/merged_all.geojson", "/filter/filtered.geojson", "/evaluate/metrics.json",
          "/aggregate/cells.csv", "/aggregate/summary.json"})
        CHECK(fs::exists(w + f));

    // idempotent rerun: byte-identical artifacts
    std::string inst_before = slurp(w + "/segment/t0000_0001_inst.bin");
    std::string merged_before = slurp(w + "/merge/merged_all.geojson");
    std::string manifest_before = slurp(w + "/segment/manifest.json");
    run_stage("segment", cfg);
    run_stage("merge", cfg);
    CHECK(slurp(w + "/segment/t0000_0001_inst.bin") == inst_before);
    CHECK(slurp(w + "/merge/merged_all.geojson") == merged_before);
    CHECK(slurp(w + "/segment/manifest.json") == manifest_before);

    // manifest hash chain: an upstream change propagates downstream
    PipelineConfig cfg2 = tiny_config(tmp.path.string(), 6);
    run_stage("scene", cfg2);
    run_stage("segment", cfg2);
    CHECK(slurp(w + "/segment/manifest.json") != manifest_before);
}

TEST_CASE("evaluate reports near-perfect agreement on the fixture scene") {
    TempDir tmp("fieldloom_eval_test");
    PipelineConfig cfg = tiny_config(tmp.path.string());
    run_stage("scene", cfg);
    run_stage("segment", cfg);
    run_stage("merge", cfg);
    run_stage("evaluate", cfg); // filter not run: falls back to merge output

    std::ifstream in(tmp.path / "evaluate/metrics.json");
    nlohmann::json j;
    in >> j;
    CHECK(j["mean_iou"].get<double>() > 0.9);
    CHECK(j["n_reference"].get<int>() == 16);
}

TEST_CASE("segment stage grid search emits the surface CSV and picks 0.2/0.2") {
    TempDir tmp("fieldloom_gridsearch_test");
    PipelineConfig cfg = tiny_config(tmp.path.string());
    cfg.j["segmentation"]["grid_search"] = {{"enabled", true},
                                            {"t_ext_candidates", {0.2, 0.95}},
                                            {"t_bnd_candidates", {0.2, 0.95}}};
    run_stage("scene", cfg);
    run_stage("segment", cfg);

    CsvTable surface = read_csv((tmp.path / "segment/grid_search.csv").string());
    CHECK(surface.header == std::vector<std::string>{"t_ext", "t_bnd", "mean_iou", "iou50"});
    REQUIRE(surface.rows.size() == 4);
    double best_iou = -1;
    std::string best_te, best_tb;
    int c_iou = surface.col_required("mean_iou");
    for (const auto& r : surface.rows) {
        double v = std::stod(r[c_iou]);
        if (v > best_iou) {
            best_iou = v;
            best_te = r[0];
            best_tb = r[1];
        }
    }
    CHECK(std::stod(best_te) == doctest::Approx(0.2));
    CHECK(std::stod(best_tb) == doctest::Approx(0.2));
}

TEST_CASE("evaluate stage writes the stratified accuracy report when a sample is given") {
    TempDir tmp("fieldloom_accuracy_test");
    PipelineConfig cfg = tiny_config(tmp.path.string());
    std::string sample_path = (tmp.path / "sample.csv").string();
    {
        std::ofstream f(sample_path);
        f << "point_id,lon,lat,map_class,reference_class\n";
        for (int k = 0; k < 95; ++k) f << "n" << k << ",36.0,-15.0,non-crop,non-crop\n";
        for (int k = 0; k < 5; ++k) f << "x" << k << ",36.0,-15.0,non-crop,crop\n";
        for (int k = 0; k < 10; ++k) f << "y" << k << ",36.0,-15.0,crop,non-crop\n";
        for (int k = 0; k < 90; ++k) f << "c" << k << ",36.0,-15.0,crop,crop\n";
    }
    cfg.j["evaluate"] = {{"sample_csv", sample_path},
                        {"weight_noncrop", 0.9},
                        {"weight_crop", 0.1}};
    run_stage("scene", cfg);
    run_stage("segment", cfg);
    run_stage("merge", cfg);
    run_stage("evaluate", cfg);

    std::ifstream in(tmp.path / "evaluate/accuracy.json");
    REQUIRE(in);
    nlohmann::json j;
    in >> j;
    CHECK(j["overall_accuracy"]["value"].get<double>() == doctest::Approx(0.945));
    CHECK(j["area_proportion"][1]["value"].get<double>() == doctest::Approx(0.9 * 0.05 + 0.1 * 0.9));
}

TEST_CASE("config overrides reach nested keys") {
    PipelineConfig cfg = tiny_config("unused");
    apply_override(cfg, "segmentation.t_ext=0.35");
    CHECK(cfg.j["segmentation"]["t_ext"].get<double>() == 0.35);
    apply_override(cfg, "filter.enabled=true");
    CHECK(cfg.j["filter"]["enabled"].get<bool>());
    apply_override(cfg, "scene.tag=abc");
    CHECK(cfg.j["scene"]["tag"].get<std::string>() == "abc");
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), std::invalid_argument);
}

TEST_CASE("field GeoJSON round trip preserves geometry and properties") {
    TempDir tmp("fieldloom_geojson_test");
    GridRef ref{36.0, -15.0, 0.0000135};
    std::vector<FieldPolygon> polys;
    FieldPolygon p;
    p.uid = "t#1";
    p.tile_id = "t";
    p.geom = make_box_polygon(100, 200, 180, 260);
    p.confidence = 0.87;
    p.area_ha = 80 * 60 * kPixelAreaM2 / 1e4;
    p.complete = true;
    p.waterway = true;
    p.field_prob = 0.72;
    polys.push_back(p);

    std::string path = (tmp.path / "fields.geojson").string();
    write_field_geojson(path, polys, ref);
    auto back = read_field_geojson(path, ref);
    REQUIRE(back.size() == 1);
    CHECK(back[0].uid == "t#1");
    CHECK(back[0].confidence == doctest::Approx(0.87));
    CHECK(back[0].waterway);
    CHECK(back[0].field_prob == doctest::Approx(0.72));
    // 7-decimal lon/lat keeps sub-pixel geometry fidelity at 1.5 m
    CHECK(geom_area(back[0].geom) == doctest::Approx(80.0 * 60.0).epsilon(1e-3));
    CHECK(iou(back[0].geom, p.geom) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mosaic stage plans composites from the acquisition CSV") {
    TempDir tmp("fieldloom_mosaic_test");
    std::string csv_path = (tmp.path / "acq.csv").string();
    {
        std::ofstream f(csv_path);
        f << "tile_id,date,cloud_cover_pct,covers_full_tile,acquisition_id\n";
        f << "t1,2023-06-10,4,1,a1\n";
        f << "t1,2023-08-01,2,0,a2\n";
        f << "t2,2022-03-05,9,0,b1\n";
        f << "t2,2023-07-20,6,0,b2\n";
        f << "t3,2023-05-05,40,1,c1\n"; // above the cloud filter, ignored
    }
    PipelineConfig cfg;
    cfg.j = {{"workdir", tmp.path.string()},
             {"mosaic",
              {{"acquisitions_csv", csv_path}, {"target_year", 2023},
               {"period_begin", "2021-01-01"}, {"period_end", "2023-12-31"}}}};
    run_stage("mosaic", cfg);

    CsvTable plan = read_csv((tmp.path / "mosaic/plan.csv").string());
    int c_tile = plan.col_required("tile_id");
    int c_id = plan.col_required("acquisition_id");
    int c_rank = plan.col_required("rank");
    // t1: full-coverage acquisition wins outright
    // t2: no full coverage -> most-recent-first composite of both partials
    int t1_rows = 0, t2_rows = 0;
    std::string t2_first;
    for (const auto& r : plan.rows) {
        if (r[c_tile] == "t1") {
            ++t1_rows;
            CHECK(r[c_id] == "a1");
        }
        if (r[c_tile] == "t2") {
            ++t2_rows;
            if (r[c_rank] == "0") t2_first = r[c_id];
        }
        CHECK(r[c_tile] != "t3");
    }
    CHECK(t1_rows == 1);
    CHECK(t2_rows == 2);
    CHECK(t2_first == "b2");
}
