#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/random.hpp"
#include "reasonforge/scene.hpp"

using namespace reasonforge;

namespace {

// Brute-force distance between two rectangles by sampling both boundaries.
double sampled_gap(const BBox& a, const BBox& b, int steps = 400) {
    auto edge_points = [steps](const BBox& r) {
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            const double x = r.x0() + t * r.width(), y = r.y0() + t * r.height();
            pts.emplace_back(x, r.y0());
            pts.emplace_back(x, r.y1());
            pts.emplace_back(r.x0(), y);
            pts.emplace_back(r.x1(), y);
        }
        return pts;
    };
    double best = INFINITY;
    const auto pa = edge_points(a), pb = edge_points(b);
    for (const auto& [ax, ay] : pa) {
        for (const auto& [bx, by] : pb) best = std::min(best, std::hypot(ax - bx, ay - by));
    }
    return best;
}

}  // namespace

TEST_CASE("bbox constructor rejects inverted corners") {
    CHECK_THROWS_AS(BBox(10, 0, 5, 5), Error);
    CHECK_NOTHROW(BBox(10, 10, 10, 90));
}

TEST_CASE("area_fraction") {
    const Scene s = fixtures::scene("s", 100, 100, {});
    CHECK(area_fraction(BBox(0, 0, 50, 50), s) == doctest::Approx(0.25));
    CHECK(area_fraction(BBox(0, 0, 100, 100), s) == 1.0);
    CHECK(area_fraction(BBox(10, 10, 10, 90), s) == 0.0);
    try {
        area_fraction(BBox(50, 50, 150, 150), s);
        FAIL("expected a domain error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Domain);
    }
}

TEST_CASE("bbox_union") {
    CHECK(bbox_union(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == BBox(0, 0, 30, 30));
    CHECK(bbox_union(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == BBox(0, 0, 10, 10));
    CHECK(bbox_union(BBox(5, 5, 15, 15), BBox(0, 0, 10, 10)) == BBox(0, 0, 15, 15));
}

TEST_CASE("bbox_union properties") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        auto box = [&] {
            const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
            return BBox(x, y, x + rng.uniform(0, 50), y + rng.uniform(0, 50));
        };
        const BBox a = box(), b = box(), c = box();
        const BBox u = bbox_union(a, b);
        CHECK(u.contains(a));
        CHECK(u.contains(b));
        CHECK(u == bbox_union(b, a));
        CHECK(bbox_union(u, c) == bbox_union(a, bbox_union(b, c)));
    }
}

TEST_CASE("bbox_gap") {
    CHECK(bbox_gap(BBox(0, 0, 10, 10), BBox(5, 5, 15, 15)) == 0.0);
    CHECK(bbox_gap(BBox(0, 0, 10, 10), BBox(20, 0, 30, 10)) == 10.0);
    const BBox a(0, 0, 10, 10), b(13, 14, 20, 20);
    CHECK(bbox_gap(a, b) == doctest::Approx(sampled_gap(a, b)).epsilon(1e-6));
    CHECK(bbox_gap(a, b) == doctest::Approx(5.0));
}

TEST_CASE("bbox_gap agrees with boundary sampling") {
    Rng rng(11);
    for (int i = 0; i < 60; ++i) {
        auto box = [&] {
            const double x = std::round(rng.uniform(0, 200)), y = std::round(rng.uniform(0, 200));
            return BBox(x, y, x + std::round(rng.uniform(1, 60)), y + std::round(rng.uniform(1, 60)));
        };
        const BBox a = box(), b = box();
        const double g = bbox_gap(a, b);
        CHECK(g >= 0.0);
        CHECK(g == doctest::Approx(bbox_gap(b, a)));
        if (a.overlaps(b)) CHECK(g == 0.0);
        else CHECK(g == doctest::Approx(sampled_gap(a, b, 200)).epsilon(1e-3));
    }
}

TEST_CASE("bbox_intersection") {
    CHECK(bbox_intersection(BBox(0, 0, 10, 10), BBox(5, 5, 15, 15)) == BBox(5, 5, 10, 10));
    CHECK_FALSE(bbox_intersection(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)).has_value());
}

TEST_CASE("import_detections keeps valid records and rejects bad ones") {
    const std::string doc = R"({"scenes":[
      {"id":"a","width":100,"height":100,"entities":[
        {"id":"e1","label":"cat","bbox":[0,0,10,10],"confidence":0.9},
        {"id":"e2","label":"dog","bbox":[10,10,20,20],"confidence":0.8,"color":"brown"},
        {"id":"e3","label":"sign","bbox":[30,30,60,40],"confidence":0.7,"text":["STOP"]}]},
      {"id":"b","width":50,"height":50,"entities":[
        {"id":"e1","label":"cup","bbox":[0,0,5,5],"confidence":0.6},
        {"id":"e2","label":"cup","bbox":[5,5,9,9],"confidence":0.4},
        {"id":"bad","label":"cup","bbox":[5,5,9,9],"confidence":1.2},
        {"id":"neg","label":"cup","bbox":[9,9,5,5],"confidence":0.5},
        {"id":"out","label":"cup","bbox":[40,40,60,60],"confidence":0.5}]}]})";
    const ImportResult r = import_detections(doc);
    REQUIRE(r.scenes.size() == 2);
    std::size_t total = 0;
    for (const auto& s : r.scenes.scenes()) total += s.entities.size();
    CHECK(total == 5);
    CHECK(r.rejected.size() == 3);
    CHECK(r.scenes.at("a").find("e3")->text == std::vector<std::string>{"STOP"});
    CHECK(r.scenes.at("b").find("bad") == nullptr);
}

TEST_CASE("import_detections edge cases") {
    CHECK(import_detections(R"({"scenes":[]})").scenes.empty());
    try {
        import_detections(R"({"scenes":[{"id":"a","width":10,"height":10,"entities":[{"id":"x","bbox":[0,0,1,1],"confidence":1}]}]})");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("entities[0]") != std::string::npos);
    }
    CHECK_THROWS_AS(import_detections("not json"), Error);
}

TEST_CASE("import -> serialize -> import is identity on retained records") {
    const SceneSet generated = generate_scenes({.count = 10, .seed = 3});
    const std::string once = serialize_scenes(generated);
    const ImportResult again = import_detections(once);
    CHECK(again.rejected.empty());
    CHECK(serialize_scenes(again.scenes) == once);
    CHECK(again.scenes.scenes() == generated.scenes());
}

TEST_CASE("parse_scenes is strict") {
    CHECK_THROWS_AS(parse_scenes(R"({"scenes":[{"id":"a","width":10,"height":10,"entities":[
        {"id":"x","label":"cup","bbox":[0,0,20,20],"confidence":0.5}]}]})"),
                    Error);
    CHECK_THROWS_AS(parse_scenes(R"({"scenes":[{"id":"a","width":10,"height":10,"entities":[
        {"id":"x","label":"cup","bbox":[0,0,2,2],"confidence":0.5},
        {"id":"x","label":"cup","bbox":[0,0,2,2],"confidence":0.5}]}]})"),
                    Error);
}

TEST_CASE("generated scenes are deterministic and valid") {
    const SceneSet a = generate_scenes({.count = 20, .seed = 42});
    const SceneSet b = generate_scenes({.count = 20, .seed = 42});
    CHECK(serialize_scenes(a) == serialize_scenes(b));
    CHECK(serialize_scenes(a) != serialize_scenes(generate_scenes({.count = 20, .seed = 43})));
    for (const auto& s : a.scenes()) CHECK_NOTHROW(check_scene(s));
}

TEST_CASE("SceneSet lookup") {
    const SceneSet set({fixtures::street()});
    CHECK(set.find("street") != nullptr);
    CHECK(set.find("nope") == nullptr);
    CHECK_THROWS_AS(set.at("nope"), Error);
}
