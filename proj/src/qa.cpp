#include "fieldloom/qa.hpp"

#include <stdexcept>

namespace fieldloom {

std::array<double, 4> QaMask::fractions() const {
    std::array<double, 4> f{0, 0, 0, 0};
    for (uint8_t c : codes.data) f[c] += 1.0;
    double n = static_cast<double>(codes.size());
    if (n > 0)
        for (auto& v : f) v /= n;
    return f;
}

QaMask qa_mask(const std::vector<Grid<uint8_t>>& image_bands) {
    if (image_bands.size() != 4)
        throw std::invalid_argument("qa_mask: expected 4 bands, got " +
                                    std::to_string(image_bands.size()));
    const int w = image_bands[0].width, h = image_bands[0].height;
    for (const auto& b : image_bands)
        if (b.width != w || b.height != h)
            throw std::invalid_argument("qa_mask: band dimension mismatch");

    QaMask m;
    m.codes = Grid<uint8_t>(w, h, static_cast<uint8_t>(QaCode::valid));
    for (size_t i = 0; i < m.codes.size(); ++i) {
        int sum = image_bands[0].data[i] + image_bands[1].data[i] + image_bands[2].data[i] +
                  image_bands[3].data[i];
        QaCode code;
        if (sum == 0) code = QaCode::nodata;
        else if (sum < 40) code = QaCode::shadow;          // mean < 10
        else if (sum > 980) code = QaCode::cloud;          // mean > 245
        else code = QaCode::valid;
        m.codes.data[i] = static_cast<uint8_t>(code);
    }
    return m;
}

} // namespace fieldloom
