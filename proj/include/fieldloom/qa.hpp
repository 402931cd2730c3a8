#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fieldloom/grid.hpp"

namespace fieldloom {

enum class QaCode : uint8_t { valid = 0, nodata = 1, shadow = 2, cloud = 3 };

struct QaMask {
    Grid<uint8_t> codes; // QaCode values

    // Fractions indexed by QaCode; sum to 1 over all pixels.
    std::array<double, 4> fractions() const;
};

// Per pixel over the 4-band 8-bit tile: band mean exactly 0 -> nodata,
// 0 < mean < 10 -> shadow, mean > 245 -> cloud, else valid. Comparisons are
// exact on the integer band sum (e.g. sum < 40 <=> mean < 10).
QaMask qa_mask(const std::vector<Grid<uint8_t>>& image_bands);

} // namespace fieldloom
