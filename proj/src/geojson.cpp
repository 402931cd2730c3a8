#include "fieldloom/geojson.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fieldloom {

using nlohmann::json;

namespace {

double round7(double v) { return std::round(v * 1e7) / 1e7; }

json ring_to_json(const Ring& ring, const GridRef& ref) {
    json arr = json::array();
    // Pixel-frame rings flip orientation under the y-axis flip to latitude;
    // emit reversed so exteriors come out counterclockwise in lon/lat.
    for (auto it = ring.rbegin(); it != ring.rend(); ++it)
        arr.push_back({round7(ref.lon_of_x(it->x())), round7(ref.lat_of_y(it->y()))});
    return arr;
}

Ring ring_from_json(const json& arr, const GridRef& ref) {
    Ring ring;
    for (auto it = arr.rbegin(); it != arr.rend(); ++it)
        ring.push_back(GeoPoint(ref.x_of_lon((*it)[0].get<double>()),
                                ref.y_of_lat((*it)[1].get<double>())));
    return ring;
}

json polygon_coords(const PolyGeom& p, const GridRef& ref) {
    json coords = json::array();
    coords.push_back(ring_to_json(p.outer(), ref));
    for (const auto& inner : p.inners()) coords.push_back(ring_to_json(inner, ref));
    return coords;
}

PolyGeom polygon_from_coords(const json& coords, const GridRef& ref) {
    PolyGeom p;
    if (coords.empty()) return p;
    p.outer() = ring_from_json(coords[0], ref);
    for (size_t i = 1; i < coords.size(); ++i)
        p.inners().push_back(ring_from_json(coords[i], ref));
    bg::correct(p);
    return p;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

void dump_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump() << "\n";
}

} // namespace

void write_field_geojson(const std::string& path, const std::vector<FieldPolygon>& polygons,
                         const GridRef& ref) {
    std::vector<const FieldPolygon*> ordered;
    for (const auto& p : polygons) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const FieldPolygon* a, const FieldPolygon* b) { return a->uid < b->uid; });

    json features = json::array();
    for (const FieldPolygon* p : ordered) {
        json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", polygon_coords(p->geom, ref)}};
        json props;
        props["id"] = p->uid;
        props["tile_id"] = p->tile_id;
        props["confidence"] = p->confidence;
        props["area_ha"] = p->area_ha;
        props["waterway_flag"] = p->waterway;
        props["complete"] = p->complete;
        if (p->field_prob >= 0)
            props["field_prob"] = p->field_prob;
        else
            props["field_prob"] = nullptr;
        f["properties"] = std::move(props);
        features.push_back(std::move(f));
    }
    dump_json(path, json{{"type", "FeatureCollection"}, {"features", features}});
}

std::vector<FieldPolygon> read_field_geojson(const std::string& path, const GridRef& ref) {
    json j = load_json(path);
    std::vector<FieldPolygon> out;
    for (const auto& f : j.at("features")) {
        FieldPolygon p;
        const auto& props = f.at("properties");
        p.uid = props.at("id").get<std::string>();
        p.tile_id = props.value("tile_id", std::string{});
        p.confidence = props.value("confidence", 0.0);
        p.area_ha = props.value("area_ha", 0.0);
        p.waterway = props.value("waterway_flag", false);
        p.complete = props.value("complete", true);
        if (props.contains("field_prob") && !props.at("field_prob").is_null())
            p.field_prob = props.at("field_prob").get<double>();
        p.geom = polygon_from_coords(f.at("geometry").at("coordinates"), ref);
        out.push_back(std::move(p));
    }
    return out;
}

void write_plain_geojson(const std::string& path, const std::vector<PolyGeom>& polygons,
                         const GridRef& ref) {
    json features = json::array();
    for (size_t i = 0; i < polygons.size(); ++i) {
        json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", polygon_coords(polygons[i], ref)}};
        f["properties"] = {{"id", static_cast<long long>(i)}};
        features.push_back(std::move(f));
    }
    dump_json(path, json{{"type", "FeatureCollection"}, {"features", features}});
}

std::vector<PolyGeom> read_plain_geojson(const std::string& path, const GridRef& ref) {
    json j = load_json(path);
    std::vector<PolyGeom> out;
    for (const auto& f : j.at("features")) {
        const auto& geom = f.at("geometry");
        const std::string type = geom.at("type").get<std::string>();
        if (type == "Polygon") {
            out.push_back(polygon_from_coords(geom.at("coordinates"), ref));
        } else if (type == "MultiPolygon") {
            for (const auto& coords : geom.at("coordinates"))
                out.push_back(polygon_from_coords(coords, ref));
        }
    }
    return out;
}

std::vector<Polyline> read_polylines_geojson(const std::string& path, const GridRef& ref) {
    json j = load_json(path);
    std::vector<Polyline> out;
    auto add_line = [&](const json& coords) {
        Polyline line;
        for (const auto& pt : coords)
            line.push_back(GeoPoint(ref.x_of_lon(pt[0].get<double>()),
                                    ref.y_of_lat(pt[1].get<double>())));
        out.push_back(std::move(line));
    };
    for (const auto& f : j.at("features")) {
        const auto& geom = f.at("geometry");
        const std::string type = geom.at("type").get<std::string>();
        if (type == "LineString") add_line(geom.at("coordinates"));
        else if (type == "MultiLineString")
            for (const auto& coords : geom.at("coordinates")) add_line(coords);
    }
    return out;
}

} // namespace fieldloom
