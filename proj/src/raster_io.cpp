#include "fieldloom/raster_io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fieldloom {

using nlohmann::json;

template <> const char* dtype_name<uint8_t>() { return "uint8"; }
template <> const char* dtype_name<int32_t>() { return "int32"; }
template <> const char* dtype_name<float>() { return "float32"; }
template <> const char* dtype_name<double>() { return "float64"; }

static json meta_to_json(const RasterMeta& m) {
    json j;
    j["width"] = m.width;
    j["height"] = m.height;
    j["bands"] = m.bands;
    j["dtype"] = m.dtype;
    j["geotransform"] = m.geotransform;
    if (m.nodata)
        j["nodata"] = *m.nodata;
    else
        j["nodata"] = nullptr;
    return j;
}

static RasterMeta meta_from_json(const json& j) {
    RasterMeta m;
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.bands = j.at("bands").get<int>();
    m.dtype = j.at("dtype").get<std::string>();
    auto gt = j.at("geotransform");
    if (gt.size() != 6) throw std::runtime_error("raster header: geotransform must have 6 entries");
    for (int i = 0; i < 6; ++i) m.geotransform[i] = gt[i].get<double>();
    if (j.contains("nodata") && !j.at("nodata").is_null()) m.nodata = j.at("nodata").get<double>();
    return m;
}

RasterMeta read_raster_meta(const std::string& base_path) {
    std::ifstream hdr(base_path + ".json");
    if (!hdr) throw std::runtime_error("cannot open raster header " + base_path + ".json");
    json j;
    hdr >> j;
    return meta_from_json(j);
}

template <typename T>
void write_raster(const std::string& base_path, const RasterMeta& meta_in,
                  const std::vector<Grid<T>>& bands) {
    if (bands.empty()) throw std::invalid_argument("write_raster: no bands");
    RasterMeta meta = meta_in;
    meta.width = bands[0].width;
    meta.height = bands[0].height;
    meta.bands = static_cast<int>(bands.size());
    meta.dtype = dtype_name<T>();
    for (const auto& b : bands)
        if (b.width != meta.width || b.height != meta.height)
            throw std::invalid_argument("write_raster: band dimension mismatch");

    std::ofstream hdr(base_path + ".json");
    if (!hdr) throw std::runtime_error("cannot write raster header " + base_path + ".json");
    hdr << meta_to_json(meta).dump(2) << "\n";

    std::ofstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write raster data " + base_path + ".bin");
    for (const auto& b : bands)
        bin.write(reinterpret_cast<const char*>(b.data.data()),
                  static_cast<std::streamsize>(b.data.size() * sizeof(T)));
}

template <typename T>
TypedRaster<T> read_raster(const std::string& base_path) {
    TypedRaster<T> r;
    r.meta = read_raster_meta(base_path);
    if (r.meta.dtype != dtype_name<T>())
        throw std::runtime_error("raster " + base_path + ": dtype is " + r.meta.dtype +
                                 ", expected " + dtype_name<T>());
    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open raster data " + base_path + ".bin");
    const size_t plane = static_cast<size_t>(r.meta.width) * r.meta.height;
    r.bands.reserve(r.meta.bands);
    for (int b = 0; b < r.meta.bands; ++b) {
        Grid<T> g(r.meta.width, r.meta.height);
        bin.read(reinterpret_cast<char*>(g.data.data()),
                 static_cast<std::streamsize>(plane * sizeof(T)));
        if (static_cast<size_t>(bin.gcount()) != plane * sizeof(T))
            throw std::runtime_error("raster " + base_path + ": truncated data file");
        r.bands.push_back(std::move(g));
    }
    return r;
}

template void write_raster<uint8_t>(const std::string&, const RasterMeta&, const std::vector<Grid<uint8_t>>&);
template void write_raster<int32_t>(const std::string&, const RasterMeta&, const std::vector<Grid<int32_t>>&);
template void write_raster<float>(const std::string&, const RasterMeta&, const std::vector<Grid<float>>&);
template void write_raster<double>(const std::string&, const RasterMeta&, const std::vector<Grid<double>>&);
template TypedRaster<uint8_t> read_raster<uint8_t>(const std::string&);
template TypedRaster<int32_t> read_raster<int32_t>(const std::string&);
template TypedRaster<float> read_raster<float>(const std::string&);
template TypedRaster<double> read_raster<double>(const std::string&);

} // namespace fieldloom
