#include <cmath>
#include <cstring>

#include "doctest.h"
#include "reasonforge/kernels.hpp"
#include "reasonforge/random.hpp"

using namespace reasonforge;
using namespace reasonforge::kernels;

namespace {

BoxColumns random_boxes(Rng& rng, std::size_t n) {
    BoxColumns c;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-100, 900), y = rng.uniform(-100, 700);
        // mix of degenerate, touching and fractional boxes
        const double w = rng.chance(0.1) ? 0.0 : rng.uniform(0, 300);
        const double h = rng.chance(0.1) ? 0.0 : rng.uniform(0, 300);
        c.push_back(x, y, x + w, y + h);
    }
    return c;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("scalar kernels against direct formulas") {
    BoxColumns c;
    c.push_back(0, 0, 10, 10);
    c.push_back(20, 0, 30, 10);
    c.push_back(13, 14, 20, 20);
    const Rect r{0, 0, 10, 10};
    std::vector<double> gap(3);
    scalar_table().gap(c, r, gap);
    CHECK(gap[0] == 0.0);
    CHECK(gap[1] == 10.0);
    CHECK(gap[2] == doctest::Approx(5.0));
    std::vector<std::uint8_t> ov(3);
    scalar_table().overlap(c, r, ov);
    CHECK(ov == std::vector<std::uint8_t>{1, 0, 0});
    std::vector<double> af(3);
    scalar_table().area_fraction(c, 0.01, af);
    CHECK(af[0] == doctest::Approx(1.0));
    CHECK(af[2] == doctest::Approx(0.42));
}

TEST_CASE("AVX2 kernels are bit-identical to the scalar reference") {
    const KernelTable* avx = avx2_table();
    if (!avx || !cpu_has_avx2()) {
        MESSAGE("AVX2 not available; skipping equivalence check");
        return;
    }
    const KernelTable& ref = scalar_table();
    Rng rng(99);
    // sizes around the vector width exercise the tail loops
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 31u, 64u, 257u, 1000u}) {
        for (int rep = 0; rep < 20; ++rep) {
            const BoxColumns c = random_boxes(rng, n);
            const double x = rng.uniform(0, 640), y = rng.uniform(0, 480);
            const Rect r{x, y, x + rng.uniform(0, 200), y + rng.uniform(0, 200)};
            std::vector<double> g1(n), g2(n), a1(n), a2(n);
            std::vector<std::uint8_t> o1(n), o2(n);
            ref.gap(c, r, g1);
            avx->gap(c, r, g2);
            ref.overlap(c, r, o1);
            avx->overlap(c, r, o2);
            const double inv = 1.0 / rng.uniform(1000, 400000);
            ref.area_fraction(c, inv, a1);
            avx->area_fraction(c, inv, a2);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(same_bits(g1[i], g2[i]));
                CHECK(same_bits(a1[i], a2[i]));
            }
            CHECK(o1 == o2);
        }
    }
    for (std::size_t n : {0u, 1u, 5u, 10u, 11u, 32u, 33u, 100u}) {
        std::vector<std::uint8_t> p1(n * 3 + 6, 7), p2(n * 3 + 6, 7);
        ref.fill_rgb(p1.data() + 3, n, 1, 2, 3);
        avx->fill_rgb(p2.data() + 3, n, 1, 2, 3);
        CHECK(p1 == p2);
    }
}

TEST_CASE("active table is one of the known tables") {
    const auto name = active().name;
    CHECK((name == scalar_table().name || (avx2_table() && name == avx2_table()->name)));
}
