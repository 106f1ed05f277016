#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "reasonforge/canvas.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/random.hpp"

using namespace reasonforge;

namespace {

bool is(const Rgb& a, const Rgb& b) { return a.r == b.r && a.g == b.g && a.b == b.b; }

}  // namespace

TEST_CASE("full_view") {
    const Scene s = fixtures::scene("s", 100, 100, {});
    const ViewState v = full_view(s);
    CHECK(v.viewport == BBox(0, 0, 100, 100));
    CHECK(v.annotations.empty());
    CHECK(area_fraction(v.viewport, s) == 1.0);
}

TEST_CASE("add_mark appends in order and clips") {
    const Scene s = fixtures::scene("s", 100, 100, {});
    ViewState v = add_mark(full_view(s), BBox(10, 10, 20, 20));
    CHECK(v.annotations.size() == 1);
    v = add_mark(v, BBox(30, 30, 40, 40));
    REQUIRE(v.annotations.size() == 2);
    CHECK(v.annotations[0].rect == BBox(10, 10, 20, 20));
    CHECK(v.last_mark()->rect == BBox(30, 30, 40, 40));

    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-50, 120), y = rng.uniform(-50, 120);
        const BBox r(x, y, x + rng.uniform(1, 80), y + rng.uniform(1, 80));
        // oracle: explicit max/min on each edge
        const double ex0 = std::max(0.0, r.x0()), ey0 = std::max(0.0, r.y0());
        const double ex1 = std::min(100.0, r.x1()), ey1 = std::min(100.0, r.y1());
        if (ex0 < ex1 && ey0 < ey1) {
            const ViewState m = add_mark(full_view(s), r);
            CHECK(m.last_mark()->rect == BBox(ex0, ey0, ex1, ey1));
        } else {
            CHECK_THROWS_AS(add_mark(full_view(s), r), Error);
        }
    }
}

TEST_CASE("add_highlights") {
    const Scene s = fixtures::street();
    const ViewState v = full_view(s);
    const ViewState h = add_highlights(v, {BBox(0, 0, 1, 1), BBox(2, 2, 3, 3), BBox(4, 4, 5, 5)});
    CHECK(h.count(AnnotationKind::Highlight) == 3);
    CHECK(add_highlights(v, {}) == v);
}

TEST_CASE("crop_zoom") {
    const Scene s = fixtures::scene("s", 100, 100, {});
    const ViewState v = full_view(s);
    CHECK(crop_zoom(v, BBox(10, 10, 30, 30)).viewport == BBox(10, 10, 30, 30));
    const ViewState marked = add_mark(v, BBox(50, 50, 60, 60));
    CHECK(crop_zoom(marked, BBox(0, 0, 40, 40)).annotations.empty());
    const ViewState partial = crop_zoom(add_mark(v, BBox(20, 20, 60, 60)), BBox(0, 0, 40, 40));
    REQUIRE(partial.annotations.size() == 1);
    CHECK(partial.annotations[0].rect == BBox(20, 20, 40, 40));
    CHECK_THROWS_AS(crop_zoom(v, BBox(10, 10, 10, 30)), Error);
}

TEST_CASE("view json round trip") {
    const Scene s = fixtures::street();
    ViewState v = add_mark(full_view(s), BBox(100, 100, 400, 300), {"bus"});
    v = add_highlights(v, {BBox(1, 2, 3, 4)}, {"dog"});
    v = crop_zoom(v, BBox(50, 50, 450, 350));
    CHECK(view_from_json(view_to_json(v)) == v);
}

TEST_CASE("render: empty scene is all white and deterministic") {
    const Scene s = fixtures::scene("s", 64, 48, {});
    const Raster r = render(s, full_view(s), 64, 48);
    for (std::size_t i = 0; i < r.pixels.size(); ++i) CHECK(r.pixels[i] == 255);
    const Scene st = fixtures::street();
    CHECK(encode_png(render(st, full_view(st), 320, 240)) == encode_png(render(st, full_view(st), 320, 240)));
}

TEST_CASE("render: a mark becomes one red outline at the affine image of its rect") {
    const Scene s = fixtures::scene("s", 200, 100, {});
    const BBox viewport(20, 10, 180, 90);
    ViewState v = crop_zoom(full_view(s), viewport);
    const BBox mark(60, 30, 140, 70);
    v = add_mark(v, mark);
    const int W = 320, H = 160;
    const Raster r = render(s, v, W, H);

    // oracle: map corners through x' = (x - vx0) * W / vw
    const int px0 = static_cast<int>(std::lround((mark.x0() - viewport.x0()) * W / viewport.width()));
    const int px1 = static_cast<int>(std::lround((mark.x1() - viewport.x0()) * W / viewport.width()));
    const int py0 = static_cast<int>(std::lround((mark.y0() - viewport.y0()) * H / viewport.height()));
    const int py1 = static_cast<int>(std::lround((mark.y1() - viewport.y0()) * H / viewport.height()));
    const int stroke = std::max(1, static_cast<int>(0.02 * std::min(W, H)));
    CHECK(to_pixels(mark, viewport, W, H) == PixelRect{px0, py0, px1, py1});

    std::size_t mismatches = 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const bool inside = x >= px0 && x < px1 && y >= py0 && y < py1;
            const bool border = inside && (x < px0 + stroke || x >= px1 - stroke || y < py0 + stroke ||
                                           y >= py1 - stroke);
            const Rgb want = border ? kMarkColor : kBackground;
            if (!is(r.at(x, y), want)) ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("render: entity fills and unknown colors") {
    Scene s = fixtures::scene("s", 10, 10, {fixtures::entity("a", "box", 0, 0, 5, 5, "red"),
                                            fixtures::entity("b", "box", 5, 5, 10, 10, "chartreuse-ish")});
    const Raster r = render(s, full_view(s), 10, 10);
    CHECK(is(r.at(1, 1), *color_rgb("red")));
    CHECK(is(r.at(7, 7), kUnknownFill));
    CHECK(is(r.at(8, 1), kBackground));
}

TEST_CASE("render: missing image file is an error") {
    Scene s = fixtures::scene("s", 10, 10, {});
    s.image_ref = "/nonexistent/image.png";
    CHECK_THROWS_AS(render(s, full_view(s), 10, 10), Error);
}

TEST_CASE("render: image_ref PNG is cropped to the viewport") {
    // 4x4 image: left half blue, right half green
    Raster img;
    img.width = 4;
    img.height = 4;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            const Rgb c = x < 2 ? Rgb{0, 0, 255} : Rgb{0, 255, 0};
            img.pixels.insert(img.pixels.end(), {c.r, c.g, c.b});
        }
    }
    const auto path = std::filesystem::temp_directory_path() / "reasonforge_canvas_test.png";
    write_file(path.string(), encode_png(img));
    Scene s = fixtures::scene("s", 40, 40, {});
    s.image_ref = path.string();
    const Raster full = render(s, full_view(s), 8, 8);
    CHECK(is(full.at(0, 0), Rgb{0, 0, 255}));
    CHECK(is(full.at(7, 7), Rgb{0, 255, 0}));
    const Raster right = render(s, crop_zoom(full_view(s), BBox(20, 0, 40, 40)), 8, 8);
    CHECK(is(right.at(0, 0), Rgb{0, 255, 0}));
    const Raster decoded = decode_image_file(path.string());
    CHECK(decoded.pixels == img.pixels);
    std::filesystem::remove(path);
}

TEST_CASE("stroke width") {
    CHECK(stroke_width(640, 480) == 9);
    CHECK(stroke_width(10, 10) == 1);
}

TEST_CASE("base64") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
}
