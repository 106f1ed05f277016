#pragma once

// Batch geometry and raster kernels.
//
// Every kernel has a scalar reference implementation and, where the CPU
// supports it, an AVX2 variant. The active table is chosen once at first use
// (REASONFORGE_SIMD=scalar forces the reference path). Variants are required
// to produce bit-identical results; the build disables FP contraction so the
// vector path performs exactly the same IEEE operations as the scalar one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace reasonforge::kernels {

/// Structure-of-arrays view of N axis-aligned boxes.
struct BoxColumns {
    std::vector<double> x0, y0, x1, y1;

    std::size_t size() const { return x0.size(); }
    void reserve(std::size_t n);
    void push_back(double ax0, double ay0, double ax1, double ay1);
};

struct Rect {
    double x0, y0, x1, y1;
};

/// out[i] = distance between closest points of box i and r (0 when they touch).
using GapFn = void (*)(const BoxColumns&, Rect r, std::span<double> out);
/// out[i] = 1 iff box i and r overlap with positive area.
using OverlapFn = void (*)(const BoxColumns&, Rect r, std::span<std::uint8_t> out);
/// out[i] = area(box i) * inv_area.
using AreaFracFn = void (*)(const BoxColumns&, double inv_area, std::span<double> out);
/// Fill `pixels` (count of RGB triplets) starting at dst with a constant color.
using FillRgbFn = void (*)(std::uint8_t* dst, std::size_t pixels, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b);

struct KernelTable {
    std::string_view name;
    GapFn gap;
    OverlapFn overlap;
    AreaFracFn area_fraction;
    FillRgbFn fill_rgb;
};

const KernelTable& scalar_table();
/// nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_has_avx2();

/// The table used by the library: AVX2 when available, unless overridden.
const KernelTable& active();

}  // namespace reasonforge::kernels
