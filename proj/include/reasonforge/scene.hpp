#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace reasonforge {

using Json = nlohmann::ordered_json;

/// Axis-aligned box in scene pixel coordinates, origin top-left.
class BBox {
public:
    BBox() = default;
    /// Throws Error(Domain) unless x0 <= x1 and y0 <= y1.
    BBox(double x0, double y0, double x1, double y1);

    double x0() const { return x0_; }
    double y0() const { return y0_; }
    double x1() const { return x1_; }
    double y1() const { return y1_; }
    double width() const { return x1_ - x0_; }
    double height() const { return y1_ - y0_; }
    double area() const { return width() * height(); }

    bool contains(const BBox& inner) const {
        return inner.x0_ >= x0_ && inner.y0_ >= y0_ && inner.x1_ <= x1_ && inner.y1_ <= y1_;
    }
    /// Positive-area overlap.
    bool overlaps(const BBox& other) const {
        return x0_ < other.x1_ && other.x0_ < x1_ && y0_ < other.y1_ && other.y0_ < y1_;
    }

    friend bool operator==(const BBox&, const BBox&) = default;

private:
    double x0_ = 0, y0_ = 0, x1_ = 0, y1_ = 0;
};

BBox bbox_union(const BBox& a, const BBox& b);
/// Closed-rectangle intersection; nullopt when disjoint.
std::optional<BBox> bbox_intersection(const BBox& a, const BBox& b);
/// 0 when the rectangles intersect or touch, else distance between closest points.
double bbox_gap(const BBox& a, const BBox& b);

struct Entity {
    std::string id;
    std::string label;
    BBox bbox;
    double confidence = 1.0;
    std::optional<std::string> color;
    std::vector<std::string> text;

    friend bool operator==(const Entity&, const Entity&) = default;
};

struct Scene {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<Entity> entities;
    std::optional<std::string> image_ref;
    std::optional<std::string> caption;

    BBox bounds() const { return BBox(0, 0, width, height); }
    double diagonal() const;
    const Entity* find(std::string_view entity_id) const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Checks the Scene invariants (positive size, unique ids, in-bounds boxes,
/// confidence range). Throws Error(Parse) naming the offending entity.
void check_scene(const Scene& scene);

/// area(b) / scene area. Throws Error(Domain) when b leaves the scene bounds.
double area_fraction(const BBox& b, const Scene& scene);

/// Immutable, shareable collection of scenes with id lookup.
class SceneSet {
public:
    SceneSet() = default;
    explicit SceneSet(std::vector<Scene> scenes);

    const std::vector<Scene>& scenes() const { return *scenes_; }
    std::size_t size() const { return scenes_->size(); }
    bool empty() const { return scenes_->empty(); }
    const Scene* find(std::string_view id) const;
    /// Throws Error(Precondition) for unknown ids.
    const Scene& at(std::string_view id) const;

private:
    std::shared_ptr<const std::vector<Scene>> scenes_ = std::make_shared<std::vector<Scene>>();
    std::shared_ptr<const std::map<std::string, std::size_t, std::less<>>> index_ =
        std::make_shared<std::map<std::string, std::size_t, std::less<>>>();
};

Json bbox_to_json(const BBox& b);
BBox bbox_from_json(const Json& j);

Json scene_to_json(const Scene& scene);
Json sceneset_to_json(const SceneSet& set);
std::string serialize_scenes(const SceneSet& set);

/// Strict loader for the full scene schema. Throws Error(Parse).
SceneSet parse_scenes(std::string_view text);
SceneSet load_scenes(const std::string& path);
void save_scenes(const SceneSet& set, const std::string& path);

struct ImportResult {
    SceneSet scenes;
    /// One line per rejected entity record.
    std::vector<std::string> rejected;
};

/// Lenient loader for detector annotations: color/text/caption optional,
/// entity records with a negative-size box, an out-of-range confidence or an
/// out-of-bounds box are dropped (and logged). Structural problems throw
/// Error(Parse) naming the record.
ImportResult import_detections(std::string_view text);
ImportResult import_detections_file(const std::string& path);

struct SceneGenOptions {
    int count = 200;
    std::uint64_t seed = 42;
    int width = 640;
    int height = 480;
    /// Fraction of entities emitted below the default confidence cutoff.
    double low_confidence_rate = 0.1;
};

/// Deterministic synthetic scene graphs: clusters of a large container
/// entity with nested text-bearing parts and nearby companions, plus isolated
/// entities and low-confidence distractors.
SceneSet generate_scenes(const SceneGenOptions& options);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace reasonforge
