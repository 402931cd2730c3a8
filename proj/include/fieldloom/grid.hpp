#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace fieldloom {

// Row-major 2-D pixel grid. (r, c) indexing, r = row from the top.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    T& operator()(int r, int c) {
        assert(in_bounds(r, c));
        return data[static_cast<size_t>(r) * width + c];
    }
    const T& operator()(int r, int c) const {
        assert(in_bounds(r, c));
        return data[static_cast<size_t>(r) * width + c];
    }

    bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool operator==(const Grid&) const = default;
};

} // namespace fieldloom
