#include "reasonforge/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace reasonforge::kernels {

void BoxColumns::reserve(std::size_t n) {
    x0.reserve(n);
    y0.reserve(n);
    x1.reserve(n);
    y1.reserve(n);
}

void BoxColumns::push_back(double ax0, double ay0, double ax1, double ay1) {
    x0.push_back(ax0);
    y0.push_back(ay0);
    x1.push_back(ax1);
    y1.push_back(ay1);
}

namespace {

void gap_scalar(const BoxColumns& boxes, Rect r, std::span<double> out) {
    const std::size_t n = boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::max(0.0, std::max(boxes.x0[i] - r.x1, r.x0 - boxes.x1[i]));
        const double dy = std::max(0.0, std::max(boxes.y0[i] - r.y1, r.y0 - boxes.y1[i]));
        out[i] = std::sqrt(dx * dx + dy * dy);
    }
}

void overlap_scalar(const BoxColumns& boxes, Rect r, std::span<std::uint8_t> out) {
    const std::size_t n = boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (boxes.x0[i] < r.x1 && r.x0 < boxes.x1[i] && boxes.y0[i] < r.y1 && r.y0 < boxes.y1[i])
                     ? 1
                     : 0;
    }
}

void area_fraction_scalar(const BoxColumns& boxes, double inv_area, std::span<double> out) {
    const std::size_t n = boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = ((boxes.x1[i] - boxes.x0[i]) * (boxes.y1[i] - boxes.y0[i])) * inv_area;
    }
}

void fill_rgb_scalar(std::uint8_t* dst, std::size_t pixels, std::uint8_t r, std::uint8_t g,
                     std::uint8_t b) {
    for (std::size_t i = 0; i < pixels; ++i) {
        dst[3 * i + 0] = r;
        dst[3 * i + 1] = g;
        dst[3 * i + 2] = b;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar", gap_scalar, overlap_scalar, area_fraction_scalar,
                                   fill_rgb_scalar};
    return table;
}

}  // namespace reasonforge::kernels
