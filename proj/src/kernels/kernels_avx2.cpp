// Compiled with -mavx2; only reached after a runtime CPUID check.

#include "reasonforge/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace reasonforge::kernels {
namespace {

void gap_avx2(const BoxColumns& boxes, Rect r, std::span<double> out) {
    const std::size_t n = boxes.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d rx0 = _mm256_set1_pd(r.x0);
    const __m256d ry0 = _mm256_set1_pd(r.y0);
    const __m256d rx1 = _mm256_set1_pd(r.x1);
    const __m256d ry1 = _mm256_set1_pd(r.y1);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d bx0 = _mm256_loadu_pd(&boxes.x0[i]);
        const __m256d by0 = _mm256_loadu_pd(&boxes.y0[i]);
        const __m256d bx1 = _mm256_loadu_pd(&boxes.x1[i]);
        const __m256d by1 = _mm256_loadu_pd(&boxes.y1[i]);
        // max(0, max(a, b)) with the same operand order as the scalar path
        const __m256d dx =
            _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(bx0, rx1), _mm256_sub_pd(rx0, bx1)), zero);
        const __m256d dy =
            _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(by0, ry1), _mm256_sub_pd(ry0, by1)), zero);
        const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
        _mm256_storeu_pd(&out[i], _mm256_sqrt_pd(d2));
    }
    for (; i < n; ++i) {
        const double dx = std::max(0.0, std::max(boxes.x0[i] - r.x1, r.x0 - boxes.x1[i]));
        const double dy = std::max(0.0, std::max(boxes.y0[i] - r.y1, r.y0 - boxes.y1[i]));
        out[i] = std::sqrt(dx * dx + dy * dy);
    }
}

void overlap_avx2(const BoxColumns& boxes, Rect r, std::span<std::uint8_t> out) {
    const std::size_t n = boxes.size();
    const __m256d rx0 = _mm256_set1_pd(r.x0);
    const __m256d ry0 = _mm256_set1_pd(r.y0);
    const __m256d rx1 = _mm256_set1_pd(r.x1);
    const __m256d ry1 = _mm256_set1_pd(r.y1);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d bx0 = _mm256_loadu_pd(&boxes.x0[i]);
        const __m256d by0 = _mm256_loadu_pd(&boxes.y0[i]);
        const __m256d bx1 = _mm256_loadu_pd(&boxes.x1[i]);
        const __m256d by1 = _mm256_loadu_pd(&boxes.y1[i]);
        __m256d m = _mm256_cmp_pd(bx0, rx1, _CMP_LT_OQ);
        m = _mm256_and_pd(m, _mm256_cmp_pd(rx0, bx1, _CMP_LT_OQ));
        m = _mm256_and_pd(m, _mm256_cmp_pd(by0, ry1, _CMP_LT_OQ));
        m = _mm256_and_pd(m, _mm256_cmp_pd(ry0, by1, _CMP_LT_OQ));
        const int bits = _mm256_movemask_pd(m);
        out[i + 0] = static_cast<std::uint8_t>(bits & 1);
        out[i + 1] = static_cast<std::uint8_t>((bits >> 1) & 1);
        out[i + 2] = static_cast<std::uint8_t>((bits >> 2) & 1);
        out[i + 3] = static_cast<std::uint8_t>((bits >> 3) & 1);
    }
    for (; i < n; ++i) {
        out[i] = (boxes.x0[i] < r.x1 && r.x0 < boxes.x1[i] && boxes.y0[i] < r.y1 && r.y0 < boxes.y1[i])
                     ? 1
                     : 0;
    }
}

void area_fraction_avx2(const BoxColumns& boxes, double inv_area, std::span<double> out) {
    const std::size_t n = boxes.size();
    const __m256d inv = _mm256_set1_pd(inv_area);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d w = _mm256_sub_pd(_mm256_loadu_pd(&boxes.x1[i]), _mm256_loadu_pd(&boxes.x0[i]));
        const __m256d h = _mm256_sub_pd(_mm256_loadu_pd(&boxes.y1[i]), _mm256_loadu_pd(&boxes.y0[i]));
        _mm256_storeu_pd(&out[i], _mm256_mul_pd(_mm256_mul_pd(w, h), inv));
    }
    for (; i < n; ++i) {
        out[i] = ((boxes.x1[i] - boxes.x0[i]) * (boxes.y1[i] - boxes.y0[i])) * inv_area;
    }
}

void fill_rgb_avx2(std::uint8_t* dst, std::size_t pixels, std::uint8_t r, std::uint8_t g,
                   std::uint8_t b) {
    // 96 bytes = 32 pixels = three 32-byte lanes with a period-3 byte pattern.
    alignas(32) std::uint8_t pattern[96];
    for (int i = 0; i < 32; ++i) {
        pattern[3 * i + 0] = r;
        pattern[3 * i + 1] = g;
        pattern[3 * i + 2] = b;
    }
    const __m256i p0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(pattern));
    const __m256i p1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(pattern + 32));
    const __m256i p2 = _mm256_load_si256(reinterpret_cast<const __m256i*>(pattern + 64));
    std::size_t i = 0;
    for (; i + 32 <= pixels; i += 32) {
        std::uint8_t* p = dst + 3 * i;
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), p0);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(p + 32), p1);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(p + 64), p2);
    }
    for (; i < pixels; ++i) {
        dst[3 * i + 0] = r;
        dst[3 * i + 1] = g;
        dst[3 * i + 2] = b;
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{"avx2", gap_avx2, overlap_avx2, area_fraction_avx2, fill_rgb_avx2};
    return &table;
}

}  // namespace reasonforge::kernels

#else

namespace reasonforge::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace reasonforge::kernels

#endif
