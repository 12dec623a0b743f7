#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace endoclass {

// RGB image held as doubles, interleaved row-major: data[(y*width + x)*3 + c].
// Raw images (normalized == false) keep every value in [0, 1]; after
// normalization values are unbounded reals.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    bool normalized = false;
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, double fill = 0.0, bool norm = false)
        : width(w), height(h), normalized(norm),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
    }

    static constexpr int channels = 3;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

}  // namespace endoclass
