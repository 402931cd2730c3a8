#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fieldloom/grid.hpp"

namespace fieldloom {

// Sidecar raster format: <base>.bin holds row-major, band-sequential samples;
// <base>.json holds {width, height, bands, dtype, geotransform, nodata}.
// geotransform = [origin_lon, pixel_size_deg, 0, origin_lat, 0, -pixel_size_deg].
struct RasterMeta {
    int width = 0;
    int height = 0;
    int bands = 1;
    std::string dtype;
    std::array<double, 6> geotransform = {0, 1, 0, 0, 0, -1};
    std::optional<double> nodata;

    double lon_of_col(double col) const { return geotransform[0] + col * geotransform[1]; }
    double lat_of_row(double row) const { return geotransform[3] + row * geotransform[5]; }
};

template <typename T>
struct TypedRaster {
    RasterMeta meta;
    std::vector<Grid<T>> bands;
};

template <typename T> const char* dtype_name();

template <typename T>
void write_raster(const std::string& base_path, const RasterMeta& meta,
                  const std::vector<Grid<T>>& bands);

template <typename T>
TypedRaster<T> read_raster(const std::string& base_path);

RasterMeta read_raster_meta(const std::string& base_path);

extern template void write_raster<uint8_t>(const std::string&, const RasterMeta&, const std::vector<Grid<uint8_t>>&);
extern template void write_raster<int32_t>(const std::string&, const RasterMeta&, const std::vector<Grid<int32_t>>&);
extern template void write_raster<float>(const std::string&, const RasterMeta&, const std::vector<Grid<float>>&);
extern template void write_raster<double>(const std::string&, const RasterMeta&, const std::vector<Grid<double>>&);
extern template TypedRaster<uint8_t> read_raster<uint8_t>(const std::string&);
extern template TypedRaster<int32_t> read_raster<int32_t>(const std::string&);
extern template TypedRaster<float> read_raster<float>(const std::string&);
extern template TypedRaster<double> read_raster<double>(const std::string&);

} // namespace fieldloom
