#include "fieldloom/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "fieldloom/acquisition.hpp"
#include "fieldloom/csv.hpp"
#include "fieldloom/evaluation.hpp"
#include "fieldloom/features.hpp"
#include "fieldloom/forest.hpp"
#include "fieldloom/geojson.hpp"
#include "fieldloom/grid_agg.hpp"
#include "fieldloom/merge.hpp"
#include "fieldloom/polygonize.hpp"
#include "fieldloom/qa.hpp"
#include "fieldloom/scene.hpp"
#include "fieldloom/segmentation.hpp"

namespace fieldloom {

namespace fs = std::filesystem;
using nlohmann::json;

std::string PipelineConfig::workdir() const { return j.value("workdir", std::string("run")); }

int PipelineConfig::workers() const {
    int w = j.value("workers", 0);
    if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(w, 1);
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path);
    PipelineConfig cfg;
    in >> cfg.j;
    return cfg;
}

void apply_override(PipelineConfig& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must be key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }

    json* node = &cfg.j;
    size_t pos = 0;
    while (true) {
        size_t dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

void log_event(const std::string& stage, const std::string& event, const json& fields) {
    static std::mutex mutex;
    json j = fields;
    j["stage"] = stage;
    j["event"] = event;
    std::string line = j.dump() + "\n";
    std::lock_guard<std::mutex> lock(mutex);
    std::cout << line;
}

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

namespace {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void require_input(const std::string& path, const std::string& producing_stage) {
    if (!fs::exists(path))
        throw MissingDependencyError("missing artifact '" + path + "'; run the '" +
                                     producing_stage + "' stage first");
}

void write_manifest(const std::string& dir, const std::string& stage, const json& params,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json j;
    j["stage"] = stage;
    j["version"] = kPipelineVersion;
    j["params"] = params;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = hex64(fnv1a_file(p));
    for (const auto& p : outputs) out[p] = hex64(fnv1a_file(p));
    j["inputs"] = in;
    j["outputs"] = out;
    std::ofstream f(dir + "/manifest.json");
    if (!f) throw std::runtime_error("cannot write manifest in " + dir);
    f << j.dump(2) << "\n";
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < std::min(workers, n); ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct SceneLayout {
    int tiles_x = 0, tiles_y = 0;
    int tile_size_px = 0, overlap_px = 0;
    int extent_x = 0, extent_y = 0;
    GridRef ref;

    int step_px() const { return tile_size_px - overlap_px; }

    TileFrame frame(int ti, int tj) const {
        TileFrame f;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "t%04d_%04d", ti, tj);
        f.tile_id = buf;
        f.px_x = static_cast<long long>(ti) * step_px();
        f.px_y = static_cast<long long>(tj) * step_px();
        f.width = tile_size_px;
        f.height = tile_size_px;
        return f;
    }
    TileRect rect(int ti, int tj) const {
        TileFrame f = frame(ti, tj);
        return {static_cast<double>(f.px_x), static_cast<double>(f.px_y),
                static_cast<double>(f.px_x + f.width), static_cast<double>(f.px_y + f.height)};
    }
    std::string prob_base(const std::string& workdir, int ti, int tj) const {
        return workdir + "/scene/" + frame(ti, tj).tile_id + "_prob";
    }
    std::string qa_base(const std::string& workdir, int ti, int tj) const {
        return workdir + "/scene/" + frame(ti, tj).tile_id + "_qa";
    }
    std::string inst_base(const std::string& workdir, int ti, int tj) const {
        return workdir + "/segment/" + frame(ti, tj).tile_id + "_inst";
    }
    std::string conf_csv(const std::string& workdir, int ti, int tj) const {
        return workdir + "/segment/" + frame(ti, tj).tile_id + "_conf.csv";
    }
};

SceneLayout load_layout(const std::string& workdir) {
    std::string path = workdir + "/scene/layout.json";
    require_input(path, "scene");
    std::ifstream in(path);
    json j;
    in >> j;
    SceneLayout l;
    l.tiles_x = j.at("tiles_x").get<int>();
    l.tiles_y = j.at("tiles_y").get<int>();
    l.tile_size_px = j.at("tile_size_px").get<int>();
    l.overlap_px = j.at("overlap_px").get<int>();
    l.extent_x = j.at("extent_x").get<int>();
    l.extent_y = j.at("extent_y").get<int>();
    l.ref.origin_lon = j.at("origin_lon").get<double>();
    l.ref.origin_lat = j.at("origin_lat").get<double>();
    l.ref.pixel_size_deg = j.at("pixel_size_deg").get<double>();
    return l;
}

SegmentationParams segmentation_params(const PipelineConfig& cfg) {
    const json s = cfg.j.value("segmentation", json::object());
    SegmentationParams p;
    p.t_ext = s.value("t_ext", 0.2);
    p.t_bnd = s.value("t_bnd", 0.2);
    p.min_instance_px = s.value("min_instance_px", 4);
    if (s.value("seed_strategy", std::string("low_boundary")) == "distance_peak")
        p.seed_strategy = SeedStrategy::distance_peak;
    p.distance_seed_threshold = s.value("distance_seed_threshold", 0.5);
    if (p.t_ext < 0 || p.t_ext > 1 || p.t_bnd < 0 || p.t_bnd > 1)
        throw std::invalid_argument("segmentation thresholds must be in [0,1]");
    return p;
}

MergeParams merge_params(const PipelineConfig& cfg, const SceneLayout& layout) {
    const json m = cfg.j.value("merge", json::object());
    MergeParams p;
    p.overlap_ratio = m.value("overlap_ratio", 0.30);
    p.min_sliver_m2 = m.value("min_sliver_m2", 9.0);
    p.overlap_px = m.value("overlap_px", static_cast<double>(layout.overlap_px));
    return p;
}

// ---------------------------------------------------------------- stages ---

void stage_scene(const PipelineConfig& cfg) {
    const json sj = cfg.j.value("scene", json::object());
    SceneParams p;
    p.seed = sj.value("seed", 7ULL);
    p.n_fields = sj.value("n_fields", 500);
    p.noise_level = sj.value("noise_level", 0.1);
    p.tiles_x = sj.value("tiles_x", 3);
    p.tiles_y = sj.value("tiles_y", 3);
    p.tile_size_px = sj.value("tile_size_px", 768);
    p.overlap_px = sj.value("overlap_px", 64);
    p.cropland_cover = sj.value("cropland_cover", 0.55);
    p.n_patches = sj.value("n_patches", 2);
    p.masked_fraction = sj.value("masked_fraction", 0.0);
    p.origin_lon = sj.value("origin_lon", 36.0);
    p.origin_lat = sj.value("origin_lat", -15.0);
    p.pixel_size_deg = sj.value("pixel_size_deg", 0.0000135);

    const std::string dir = cfg.workdir() + "/scene";
    fs::create_directories(dir);
    SyntheticScene scene = generate_scene(p);
    log_event("scene", "generated",
              {{"n_fields", scene.truth_polygons.size()},
               {"extent_x", scene.extent_x},
               {"extent_y", scene.extent_y}});

    std::vector<std::string> outputs;
    SceneLayout layout;
    layout.tiles_x = p.tiles_x;
    layout.tiles_y = p.tiles_y;
    layout.tile_size_px = p.tile_size_px;
    layout.overlap_px = p.overlap_px;
    layout.extent_x = scene.extent_x;
    layout.extent_y = scene.extent_y;
    layout.ref = scene.ref;

    for (int tj = 0; tj < p.tiles_y; ++tj) {
        for (int ti = 0; ti < p.tiles_x; ++ti) {
            ProbabilityTile t = scene.probability_tile(ti, tj);
            std::string base = layout.prob_base(cfg.workdir(), ti, tj);
            write_raster<float>(base, t.meta, {t.extent_prob, t.boundary_prob, t.distance});
            outputs.push_back(base + ".bin");

            QaTile qa = scene.qa_tile(ti, tj);
            RasterMeta qmeta = t.meta;
            qmeta.bands = 1;
            qmeta.dtype = "uint8";
            std::string qbase = layout.qa_base(cfg.workdir(), ti, tj);
            write_raster<uint8_t>(qbase, qmeta, {qa.codes});
            outputs.push_back(qbase + ".bin");
        }
    }

    write_field_geojson(dir + "/truth.geojson", scene.truth_polygons, scene.ref);
    outputs.push_back(dir + "/truth.geojson");

    json lj{{"tiles_x", layout.tiles_x},       {"tiles_y", layout.tiles_y},
            {"tile_size_px", layout.tile_size_px}, {"overlap_px", layout.overlap_px},
            {"extent_x", layout.extent_x},     {"extent_y", layout.extent_y},
            {"origin_lon", layout.ref.origin_lon}, {"origin_lat", layout.ref.origin_lat},
            {"pixel_size_deg", layout.ref.pixel_size_deg},
            {"n_fields", scene.truth_polygons.size()}};
    std::ofstream lf(dir + "/layout.json");
    lf << lj.dump(2) << "\n";
    lf.close();
    outputs.push_back(dir + "/layout.json");

    write_manifest(dir, "scene", sj, {}, outputs);
}

InstanceRaster read_instances(const SceneLayout& layout, const std::string& workdir, int ti,
                              int tj) {
    auto raster = read_raster<int32_t>(layout.inst_base(workdir, ti, tj));
    InstanceRaster inst;
    inst.ids = std::move(raster.bands.at(0));
    CsvTable t = read_csv(layout.conf_csv(workdir, ti, tj));
    int c_conf = t.col_required("confidence");
    int c_px = t.col_required("pixel_count");
    for (const auto& row : t.rows) {
        inst.confidences.push_back(std::stod(row[c_conf]));
        inst.pixel_counts.push_back(std::stoll(row[c_px]));
    }
    return inst;
}

void stage_segment(const PipelineConfig& cfg) {
    SegmentationParams params = segmentation_params(cfg); // validate before dependency checks
    SceneLayout layout = load_layout(cfg.workdir());
    const std::string dir = cfg.workdir() + "/segment";
    fs::create_directories(dir);

    std::vector<std::string> inputs, outputs;

    // Optional hyperparameter search against reference fields fully interior
    // to a tile.
    const json gs = cfg.j.value("segmentation", json::object()).value("grid_search", json::object());
    if (gs.value("enabled", false)) {
        std::string ref_path = cfg.workdir() + "/scene/truth.geojson";
        require_input(ref_path, "scene");
        auto reference = read_field_geojson(ref_path, layout.ref);
        std::vector<ReferenceTile> ref_tiles;
        for (int tj = 0; tj < layout.tiles_y; ++tj) {
            for (int ti = 0; ti < layout.tiles_x; ++ti) {
                std::string base = layout.prob_base(cfg.workdir(), ti, tj);
                require_input(base + ".json", "scene");
                auto raster = read_raster<float>(base);
                TileFrame f = layout.frame(ti, tj);
                ReferenceTile rt;
                rt.tile.tile_id = f.tile_id;
                rt.tile.meta = raster.meta;
                rt.tile.extent_prob = std::move(raster.bands.at(0));
                rt.tile.boundary_prob = std::move(raster.bands.at(1));
                rt.tile.distance = std::move(raster.bands.at(2));
                for (const auto& fp : reference) {
                    BBox b = geom_bbox(fp.geom);
                    if (b.min_corner().x() >= f.px_x && b.max_corner().x() <= f.px_x + f.width &&
                        b.min_corner().y() >= f.px_y && b.max_corner().y() <= f.px_y + f.height) {
                        PolyGeom local = fp.geom;
                        for (auto& pt : local.outer())
                            pt = GeoPoint(pt.x() - f.px_x, pt.y() - f.px_y);
                        for (auto& ring : local.inners())
                            for (auto& pt : ring) pt = GeoPoint(pt.x() - f.px_x, pt.y() - f.px_y);
                        rt.reference_fields.push_back(std::move(local));
                    }
                }
                if (!rt.reference_fields.empty()) ref_tiles.push_back(std::move(rt));
            }
        }
        std::vector<double> te = gs.value("t_ext_candidates", std::vector<double>{0.1, 0.2, 0.3});
        std::vector<double> tb = gs.value("t_bnd_candidates", std::vector<double>{0.1, 0.2, 0.3});
        GridSearchResult result = grid_search(ref_tiles, te, tb, params);
        params = result.best;
        write_grid_search_csv(dir + "/grid_search.csv", result);
        outputs.push_back(dir + "/grid_search.csv");
        log_event("segment", "grid_search_done",
                  {{"t_ext", params.t_ext}, {"t_bnd", params.t_bnd},
                   {"mean_iou", result.best_mean_iou}});
    }

    const int n_tiles = layout.tiles_x * layout.tiles_y;
    std::vector<std::string> tile_outputs(n_tiles * 2);
    std::vector<std::string> tile_inputs(n_tiles);
    parallel_for(n_tiles, cfg.workers(), [&](int k) {
        int ti = k % layout.tiles_x, tj = k / layout.tiles_x;
        std::string base = layout.prob_base(cfg.workdir(), ti, tj);
        require_input(base + ".json", "scene");
        require_input(base + ".bin", "scene");
        auto raster = read_raster<float>(base);
        ProbabilityTile tile;
        tile.tile_id = layout.frame(ti, tj).tile_id;
        tile.meta = raster.meta;
        tile.extent_prob = std::move(raster.bands.at(0));
        tile.boundary_prob = std::move(raster.bands.at(1));
        tile.distance = std::move(raster.bands.at(2));

        InstanceRaster inst = segment_tile(tile, params);

        RasterMeta imeta = tile.meta;
        imeta.bands = 1;
        imeta.dtype = "int32";
        imeta.nodata = 0.0;
        std::string ibase = layout.inst_base(cfg.workdir(), ti, tj);
        write_raster<int32_t>(ibase, imeta, {inst.ids});

        CsvTable t;
        t.header = {"instance_id", "confidence", "pixel_count"};
        char buf[64];
        for (int32_t id = 1; id <= inst.n_instances(); ++id) {
            std::snprintf(buf, sizeof(buf), "%.9g", inst.confidences[id - 1]);
            t.rows.push_back({std::to_string(id), buf, std::to_string(inst.pixel_counts[id - 1])});
        }
        write_csv(layout.conf_csv(cfg.workdir(), ti, tj), t);

        tile_inputs[k] = base + ".bin";
        tile_outputs[2 * k] = ibase + ".bin";
        tile_outputs[2 * k + 1] = layout.conf_csv(cfg.workdir(), ti, tj);
        log_event("segment", "tile_done",
                  {{"tile", tile.tile_id}, {"instances", inst.n_instances()}});
    });

    inputs.insert(inputs.end(), tile_inputs.begin(), tile_inputs.end());
    outputs.insert(outputs.end(), tile_outputs.begin(), tile_outputs.end());
    json params_json{{"t_ext", params.t_ext},
                     {"t_bnd", params.t_bnd},
                     {"min_instance_px", params.min_instance_px}};
    write_manifest(dir, "segment", params_json, inputs, outputs);
}

void stage_merge(const PipelineConfig& cfg) {
    SceneLayout layout = load_layout(cfg.workdir());
    const std::string dir = cfg.workdir() + "/merge";
    fs::create_directories(dir);

    MergeParams params = merge_params(cfg, layout);
    std::vector<std::string> inputs, outputs;

    std::vector<std::vector<TileSlot>> rows(layout.tiles_y);
    long long n_in = 0;
    for (int tj = 0; tj < layout.tiles_y; ++tj) {
        for (int ti = 0; ti < layout.tiles_x; ++ti) {
            require_input(layout.inst_base(cfg.workdir(), ti, tj) + ".json", "segment");
            require_input(layout.conf_csv(cfg.workdir(), ti, tj), "segment");
            InstanceRaster inst = read_instances(layout, cfg.workdir(), ti, tj);
            TileSlot slot;
            slot.rect = layout.rect(ti, tj);
            slot.polygons = polygonize(inst, layout.frame(ti, tj));
            n_in += static_cast<long long>(slot.polygons.size());
            rows[tj].push_back(std::move(slot));
            inputs.push_back(layout.inst_base(cfg.workdir(), ti, tj) + ".bin");
        }
    }

    std::vector<SuperTileSet> blocks = merge_pass(rows, params);

    if (cfg.j.contains("waterways_geojson") &&
        !cfg.j["waterways_geojson"].get<std::string>().empty()) {
        const std::string wpath = cfg.j["waterways_geojson"].get<std::string>();
        require_input(wpath, "waterways input");
        auto lines = read_polylines_geojson(wpath, layout.ref);
        for (auto& b : blocks) flag_waterways(b.polygons, lines);
        inputs.push_back(wpath);
    }

    std::vector<FieldPolygon> all;
    for (const auto& b : blocks) {
        char name[80];
        std::snprintf(name, sizeof(name), "%s/supertile_%03d_%03d.geojson", dir.c_str(), b.block_i,
                      b.block_j);
        write_field_geojson(name, b.polygons, layout.ref);
        outputs.push_back(name);
        all.insert(all.end(), b.polygons.begin(), b.polygons.end());
    }
    std::sort(all.begin(), all.end(),
              [](const FieldPolygon& a, const FieldPolygon& b) { return a.uid < b.uid; });

    write_field_geojson(dir + "/merged_all.geojson", all, layout.ref);
    outputs.push_back(dir + "/merged_all.geojson");

    double total_area = 0;
    for (const auto& p : all) total_area += p.area_ha;
    json summary{{"tiles", layout.tiles_x * layout.tiles_y},
                 {"polygons_in", n_in},
                 {"polygons_out", all.size()},
                 {"total_area_ha", total_area}};
    std::ofstream sf(dir + "/summary.json");
    sf << summary.dump(2) << "\n";
    sf.close();
    outputs.push_back(dir + "/summary.json");
    log_event("merge", "done", summary);

    json params_json{{"overlap_ratio", params.overlap_ratio},
                     {"min_sliver_m2", params.min_sliver_m2},
                     {"overlap_px", params.overlap_px}};
    write_manifest(dir, "merge", params_json, inputs, outputs);
}

std::string best_polygon_input(const PipelineConfig& cfg) {
    std::string filtered = cfg.workdir() + "/filter/filtered.geojson";
    if (fs::exists(filtered)) return filtered;
    std::string merged = cfg.workdir() + "/merge/merged_all.geojson";
    require_input(merged, "merge");
    return merged;
}

void stage_filter(const PipelineConfig& cfg) {
    SceneLayout layout = load_layout(cfg.workdir());
    const std::string dir = cfg.workdir() + "/filter";
    fs::create_directories(dir);
    const json fj = cfg.j.value("filter", json::object());

    std::string merged = cfg.workdir() + "/merge/merged_all.geojson";
    require_input(merged, "merge");
    auto polygons = read_field_geojson(merged, layout.ref);
    std::vector<std::string> inputs{merged}, outputs;

    if (!fj.value("enabled", true)) {
        // pass-through: downstream stages read the merge output unchanged
        write_field_geojson(dir + "/filtered.geojson", polygons, layout.ref);
        outputs.push_back(dir + "/filtered.geojson");
        log_event("filter", "disabled_pass_through", {{"polygons", polygons.size()}});
        write_manifest(dir, "filter", fj, inputs, outputs);
        return;
    }

    ForestModel model;
    const std::string model_path = fj.value("model_json", std::string{});
    const std::string samples_path = fj.value("samples_csv", std::string{});
    if (!model_path.empty() && fs::exists(model_path)) {
        model = load_forest_json(model_path);
        inputs.push_back(model_path);
    } else if (!samples_path.empty()) {
        require_input(samples_path, "labeled polygon samples");
        auto samples = load_samples_csv(samples_path);
        std::vector<LabeledPolygonSample> train, test;
        for (const auto& s : samples) (s.split == "test" ? test : train).push_back(s);
        model = train_forest(train, fj.value("n_trees", 250), fj.value("mtry", 3),
                             fj.value("seed", 17ULL));
        save_forest_json(dir + "/model.json", model);
        outputs.push_back(dir + "/model.json");
        inputs.push_back(samples_path);
        if (!test.empty()) {
            long long correct = 0;
            for (const auto& s : test) {
                double p = predict_field_probability(model, s.features);
                if ((p >= 0.5) == s.is_field) ++correct;
            }
            log_event("filter", "holdout_accuracy",
                      {{"accuracy", static_cast<double>(correct) / test.size()},
                       {"n_test", test.size()}});
        }
    } else {
        throw MissingDependencyError(
            "filter stage needs filter.model_json or filter.samples_csv");
    }

    // 3x3-block context statistics keyed by super-tile index.
    struct BlockAgg {
        double size_sum = 0, prob_sum = 0;
        long long n = 0;
    };
    std::map<std::pair<int, int>, BlockAgg> block_stats;
    const double block_px = 3.0 * layout.step_px();
    auto block_of = [&](const FieldPolygon& p) {
        GeoPoint c = geom_centroid(p.geom);
        return std::make_pair(static_cast<int>(c.x() / block_px),
                              static_cast<int>(c.y() / block_px));
    };
    for (const auto& p : polygons) {
        BlockAgg& b = block_stats[block_of(p)];
        b.size_sum += p.area_ha;
        b.prob_sum += p.confidence;
        ++b.n;
    }

    // Ancillary cropland fractions, when a raster is configured.
    std::map<std::pair<int, int>, NeighborhoodStats> stats;
    const std::string crop_path = fj.value("cropland_raster", std::string{});
    TypedRaster<uint8_t> crop_raster;
    bool have_crop = !crop_path.empty() && fs::exists(crop_path + ".json");
    if (have_crop) {
        crop_raster = read_raster<uint8_t>(crop_path);
        inputs.push_back(crop_path + ".bin");
    }
    for (const auto& [key, agg] : block_stats) {
        NeighborhoodStats ns;
        ns.neigh3x3_mean_size_ha = agg.n > 0 ? agg.size_sum / agg.n : 0;
        ns.neigh3x3_mean_median_prob = agg.n > 0 ? agg.prob_sum / agg.n : 0;
        if (have_crop) {
            double x0 = key.first * block_px, y0 = key.second * block_px;
            ns.neigh3x3_crop_frac = crop_fraction_in_bounds(
                crop_raster, layout.ref.lon_of_x(x0), layout.ref.lat_of_y(y0 + block_px),
                layout.ref.lon_of_x(x0 + block_px), layout.ref.lat_of_y(y0));
            double cx0 = x0 + layout.step_px(), cy0 = y0 + layout.step_px();
            ns.tile_crop_frac = crop_fraction_in_bounds(
                crop_raster, layout.ref.lon_of_x(cx0),
                layout.ref.lat_of_y(cy0 + layout.step_px()),
                layout.ref.lon_of_x(cx0 + layout.step_px()), layout.ref.lat_of_y(cy0));
        }
        stats[key] = ns;
    }

    for (auto& p : polygons) {
        FeatureVector f = compute_features(p, stats[block_of(p)]);
        p.field_prob = predict_field_probability(model, f.as_array());
    }

    write_field_geojson(dir + "/scored.geojson", polygons, layout.ref);
    outputs.push_back(dir + "/scored.geojson");

    double threshold = fj.value("threshold", 0.6);
    auto retained = apply_threshold(polygons, threshold);
    write_field_geojson(dir + "/filtered.geojson", retained, layout.ref);
    outputs.push_back(dir + "/filtered.geojson");
    log_event("filter", "done",
              {{"scored", polygons.size()}, {"retained", retained.size()},
               {"threshold", threshold}});
    write_manifest(dir, "filter", fj, inputs, outputs);
}

void stage_evaluate(const PipelineConfig& cfg) {
    SceneLayout layout = load_layout(cfg.workdir());
    const std::string dir = cfg.workdir() + "/evaluate";
    fs::create_directories(dir);
    const json ej = cfg.j.value("evaluate", json::object());

    std::string pred_path = best_polygon_input(cfg);
    std::string ref_path = ej.value("reference_geojson", std::string{});
    if (ref_path.empty()) ref_path = cfg.workdir() + "/scene/truth.geojson";
    require_input(ref_path, "scene (or provide evaluate.reference_geojson)");

    auto predictions = read_field_geojson(pred_path, layout.ref);
    auto reference = read_field_geojson(ref_path, layout.ref);
    std::vector<std::string> inputs{pred_path, ref_path}, outputs;

    std::vector<PolyGeom> ref_geoms, pred_geoms;
    for (const auto& p : reference) ref_geoms.push_back(p.geom);
    for (const auto& p : predictions) pred_geoms.push_back(p.geom);

    const double ha_per_px2 = kPixelAreaM2 / 1e4;
    auto pairs = match_fields(ref_geoms, pred_geoms, ha_per_px2);
    ObjectMetrics om = object_metrics(pairs, pred_geoms.size());
    SizeRegressionStats sr = size_regression_stats(pairs);

    json j;
    j["n_reference"] = ref_geoms.size();
    j["n_predictions"] = pred_geoms.size();
    j["mean_iou"] = om.mean_iou;
    j["median_iou"] = om.median_iou;
    j["frac_iou_above_50"] = om.frac_iou_above_50;
    j["frac_iou_above_80"] = om.frac_iou_above_80;
    j["mean_dice"] = om.mean_dice;
    j["precision"] = om.precision;
    j["recall"] = om.recall;
    j["size_rmse_ha"] = sr.rmse;
    j["size_mae_ha"] = sr.mae;
    j["size_me_ha"] = sr.me;
    j["size_r2"] = sr.r2;
    std::ofstream mf(dir + "/metrics.json");
    mf << j.dump(2) << "\n";
    mf.close();
    outputs.push_back(dir + "/metrics.json");
    log_event("evaluate", "metrics", j);

    const std::string sample_path = ej.value("sample_csv", std::string{});
    if (!sample_path.empty()) {
        require_input(sample_path, "validation sample");
        std::array<double, 2> w{ej.value("weight_noncrop", 0.0), ej.value("weight_crop", 0.0)};
        StratifiedSample sample = load_sample_csv(sample_path, w);
        ConfusionCounts n = count_confusion(sample);
        ProbMatrix p = confusion_from_sample(sample);
        AccuracyReport report = accuracy_estimates(
            p, sample.weights, {n[0][0] + n[0][1], n[1][0] + n[1][1]});
        write_accuracy_report_json(dir + "/accuracy.json", report);
        outputs.push_back(dir + "/accuracy.json");
        inputs.push_back(sample_path);
    }

    write_manifest(dir, "evaluate", ej, inputs, outputs);
}

void stage_aggregate(const PipelineConfig& cfg) {
    SceneLayout layout = load_layout(cfg.workdir());
    const std::string dir = cfg.workdir() + "/aggregate";
    fs::create_directories(dir);
    const json aj = cfg.j.value("aggregate", json::object());

    std::string pred_path = best_polygon_input(cfg);
    auto polygons = read_field_geojson(pred_path, layout.ref);
    std::vector<std::string> inputs{pred_path}, outputs;

    bool drop_waterways = aj.value("exclude_waterways", false);
    if (drop_waterways)
        std::erase_if(polygons, [](const FieldPolygon& p) { return p.waterway; });

    std::vector<QaTile> qa_tiles;
    for (int tj = 0; tj < layout.tiles_y; ++tj) {
        for (int ti = 0; ti < layout.tiles_x; ++ti) {
            std::string qbase = layout.qa_base(cfg.workdir(), ti, tj);
            require_input(qbase + ".json", "scene");
            auto raster = read_raster<uint8_t>(qbase);
            QaTile q;
            q.frame = layout.frame(ti, tj);
            q.codes = std::move(raster.bands.at(0));
            q.owned_x0 = q.frame.px_x == 0 ? 0 : q.frame.px_x;
            q.owned_y0 = q.frame.px_y == 0 ? 0 : q.frame.px_y;
            q.owned_x1 = ti == layout.tiles_x - 1 ? layout.extent_x
                                                  : (ti + 1LL) * layout.step_px();
            q.owned_y1 = tj == layout.tiles_y - 1 ? layout.extent_y
                                                  : (tj + 1LL) * layout.step_px();
            qa_tiles.push_back(std::move(q));
            inputs.push_back(qbase + ".bin");
        }
    }

    AggGrid grid = make_agg_grid(layout.ref, layout.extent_x, layout.extent_y,
                                 aj.value("cell_size_deg", 0.05));
    auto cells = aggregate_cells(polygons, qa_tiles, layout.ref, grid);

    write_cell_stats_csv(dir + "/cells.csv", cells, grid);
    outputs.push_back(dir + "/cells.csv");
    write_cell_stats_rasters(dir + "/cellstats", cells, grid);
    outputs.push_back(dir + "/cellstats.bin");

    // optional forest change
    const std::string f10 = aj.value("forest2010_raster", std::string{});
    const std::string f20 = aj.value("forest2020_raster", std::string{});
    if (!f10.empty() && !f20.empty()) {
        auto r10 = read_raster<uint8_t>(f10);
        auto r20 = read_raster<uint8_t>(f20);
        auto change = net_forest_change(r10, r20, grid);
        CsvTable t;
        t.header = {"cell_x", "cell_y", "forest_2010_frac", "forest_2020_frac",
                    "net_change_pct", "defined", "no_net_change"};
        char buf[64];
        auto fmt = [&buf](double v) {
            std::snprintf(buf, sizeof(buf), "%.8g", v);
            return std::string(buf);
        };
        for (const auto& c : change)
            t.rows.push_back({std::to_string(c.cell_x), std::to_string(c.cell_y),
                              fmt(c.forest_2010_frac), fmt(c.forest_2020_frac),
                              fmt(c.net_change_pct), c.defined ? "1" : "0",
                              c.no_net_change ? "1" : "0"});
        write_csv(dir + "/forest_change.csv", t);
        outputs.push_back(dir + "/forest_change.csv");
        inputs.push_back(f10 + ".bin");
        inputs.push_back(f20 + ".bin");
    }

    // optional cross-product comparison (other grid as a 1-band float64 raster)
    const std::string other = aj.value("other_product_raster", std::string{});
    if (!other.empty()) {
        auto oraster = read_raster<double>(other);
        if (oraster.meta.width != grid.n_cols || oraster.meta.height != grid.n_rows)
            throw std::invalid_argument("compare: other product grid mismatch");
        std::vector<double> frac(oraster.bands.at(0).data.begin(), oraster.bands.at(0).data.end());
        ProductComparison cmp = compare_products(cells, frac, grid);
        CsvTable t;
        t.header = {"cell_x", "cell_y", "delta", "newly_cropped"};
        char buf[64];
        for (int cy = 0; cy < grid.n_rows; ++cy)
            for (int cx = 0; cx < grid.n_cols; ++cx) {
                size_t i = static_cast<size_t>(cy) * grid.n_cols + cx;
                std::snprintf(buf, sizeof(buf), "%.8g", cmp.delta[i]);
                t.rows.push_back({std::to_string(cx), std::to_string(cy), buf,
                                  cmp.newly_cropped[i] ? "1" : "0"});
            }
        write_csv(dir + "/comparison.csv", t);
        outputs.push_back(dir + "/comparison.csv");
        inputs.push_back(other + ".bin");
    }

    // national roll-up
    double total_area = 0;
    std::vector<double> sizes;
    for (const auto& p : polygons) {
        total_area += p.area_ha;
        sizes.push_back(p.area_ha);
    }
    std::sort(sizes.begin(), sizes.end());
    json summary;
    summary["n_fields"] = sizes.size();
    summary["total_area_ha"] = total_area;
    if (!sizes.empty()) {
        summary["mean_field_size_ha"] = total_area / sizes.size();
        summary["median_field_size_ha"] = sizes[sizes.size() / 2];
        long long below_half = std::count_if(sizes.begin(), sizes.end(),
                                             [](double v) { return v < 0.5; });
        summary["frac_below_0.5_ha"] = static_cast<double>(below_half) / sizes.size();
    }
    std::ofstream sf(dir + "/summary.json");
    sf << summary.dump(2) << "\n";
    sf.close();
    outputs.push_back(dir + "/summary.json");
    log_event("aggregate", "done", summary);

    write_manifest(dir, "aggregate", aj, inputs, outputs);
}

void stage_mosaic(const PipelineConfig& cfg) {
    const std::string dir = cfg.workdir() + "/mosaic";
    fs::create_directories(dir);
    const json mj = cfg.j.value("mosaic", json::object());

    const std::string acq_path = mj.value("acquisitions_csv", std::string{});
    if (acq_path.empty())
        throw MissingDependencyError("mosaic stage needs mosaic.acquisitions_csv");
    require_input(acq_path, "acquisition metadata");

    int target_year = mj.value("target_year", 2023);
    DateRange period{parse_iso_date(mj.value("period_begin", std::string("2021-01-01"))),
                     parse_iso_date(mj.value("period_end", std::string("2023-12-31")))};

    auto all = load_acquisitions_csv(acq_path);
    std::map<std::string, std::vector<AcquisitionMeta>> by_tile;
    long long rejected = 0;
    for (auto& a : all) {
        bool in_period = !(a.date < period.begin) && !(period.end < a.date);
        if (a.cloud_cover_pct > 10.0 || !in_period) {
            ++rejected;
            continue;
        }
        by_tile[a.tile_id].push_back(std::move(a));
    }

    CsvTable plan;
    plan.header = {"tile_id", "rank", "acquisition_id", "date", "cloud_cover_pct",
                   "covers_full_tile"};
    CsvTable gaps;
    gaps.header = {"tile_id"};
    char buf[32];
    for (const auto& [tile_id, candidates] : by_tile) {
        auto selected = select_acquisition(candidates, target_year, period);
        std::vector<AcquisitionMeta> composite;
        if (selected && selected->covers_full_tile)
            composite = {*selected};
        else
            composite = mosaic_fill(selected, candidates);
        if (composite.empty()) {
            gaps.rows.push_back({tile_id});
            continue;
        }
        for (size_t r = 0; r < composite.size(); ++r) {
            const auto& a = composite[r];
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", a.date.year, a.date.month,
                          a.date.day);
            plan.rows.push_back({tile_id, std::to_string(r), a.acquisition_id, buf,
                                 std::to_string(a.cloud_cover_pct),
                                 a.covers_full_tile ? "1" : "0"});
        }
    }
    write_csv(dir + "/plan.csv", plan);
    write_csv(dir + "/gaps.csv", gaps);
    std::vector<std::string> outputs{dir + "/plan.csv", dir + "/gaps.csv"};
    log_event("mosaic", "planned",
              {{"tiles", by_tile.size()}, {"rejected_candidates", rejected},
               {"gaps", gaps.rows.size()}});

    // QA masks for any provided image tiles (4-band 8-bit sidecar rasters).
    const std::string image_dir = mj.value("image_dir", std::string{});
    std::vector<std::string> inputs{acq_path};
    if (!image_dir.empty() && fs::exists(image_dir)) {
        CsvTable fractions;
        fractions.header = {"tile", "valid", "nodata", "shadow", "cloud"};
        std::vector<fs::path> headers;
        for (const auto& entry : fs::directory_iterator(image_dir))
            if (entry.path().extension() == ".json") headers.push_back(entry.path());
        std::sort(headers.begin(), headers.end());
        for (const auto& hdr : headers) {
            std::string base = hdr.string().substr(0, hdr.string().size() - 5);
            auto raster = read_raster<uint8_t>(base);
            QaMask mask = qa_mask(raster.bands);
            RasterMeta qmeta = raster.meta;
            qmeta.bands = 1;
            qmeta.dtype = "uint8";
            std::string qbase = dir + "/" + fs::path(base).filename().string() + "_qa";
            write_raster<uint8_t>(qbase, qmeta, {mask.codes});
            outputs.push_back(qbase + ".bin");
            inputs.push_back(base + ".bin");
            auto f = mask.fractions();
            char fb[64];
            std::vector<std::string> row{fs::path(base).filename().string()};
            for (int k = 0; k < 4; ++k) {
                std::snprintf(fb, sizeof(fb), "%.8g", f[k]);
                row.emplace_back(fb);
            }
            fractions.rows.push_back(std::move(row));
        }
        write_csv(dir + "/qa_fractions.csv", fractions);
        outputs.push_back(dir + "/qa_fractions.csv");
    }

    write_manifest(dir, "mosaic", mj, inputs, outputs);
}

} // namespace

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
    fs::create_directories(cfg.workdir());
    log_event(stage, "start", {{"workdir", cfg.workdir()}});
    if (stage == "scene") stage_scene(cfg);
    else if (stage == "mosaic") stage_mosaic(cfg);
    else if (stage == "segment") stage_segment(cfg);
    else if (stage == "merge") stage_merge(cfg);
    else if (stage == "filter") stage_filter(cfg);
    else if (stage == "evaluate") stage_evaluate(cfg);
    else if (stage == "aggregate") stage_aggregate(cfg);
    else throw std::invalid_argument("unknown stage '" + stage + "'");
    log_event(stage, "finish");
}

} // namespace fieldloom
