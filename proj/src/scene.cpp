#include "reasonforge/scene.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "reasonforge/colors.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/random.hpp"

namespace reasonforge {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Execution: return "execution";
        case ErrorKind::Policy: return "policy";
        case ErrorKind::Synthesis: return "synthesis";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
        case ErrorKind::Precondition: return "precondition";
    }
    return "unknown";
}

// ---------------------------------------------------------------- colors

namespace {
constexpr std::array<NamedColor, 13> kColors{{
    {"red", {220, 30, 30}},
    {"orange", {245, 140, 20}},
    {"yellow", {240, 220, 40}},
    {"green", {40, 160, 60}},
    {"blue", {40, 80, 220}},
    {"purple", {130, 50, 170}},
    {"pink", {245, 150, 190}},
    {"brown", {130, 85, 40}},
    {"black", {20, 20, 20}},
    {"white", {250, 250, 250}},
    {"gray", {150, 150, 150}},
    {"grey", {150, 150, 150}},
    {"silver", {190, 190, 200}},
}};
}  // namespace

std::span<const NamedColor> known_colors() { return kColors; }

std::optional<Rgb> color_rgb(std::string_view name) {
    for (const auto& c : kColors) {
        if (c.name == name) return c.rgb;
    }
    return std::nullopt;
}

bool is_known_color(std::string_view name) { return color_rgb(name).has_value(); }

// ---------------------------------------------------------------- geometry

BBox::BBox(double x0, double y0, double x1, double y1) : x0_(x0), y0_(y0), x1_(x1), y1_(y1) {
    if (!(x0 <= x1) || !(y0 <= y1)) {
        std::ostringstream os;
        os << "bbox corners out of order (" << x0 << "," << y0 << "," << x1 << "," << y1 << ")";
        throw Error::domain(os.str());
    }
}

BBox bbox_union(const BBox& a, const BBox& b) {
    return BBox(std::min(a.x0(), b.x0()), std::min(a.y0(), b.y0()), std::max(a.x1(), b.x1()),
                std::max(a.y1(), b.y1()));
}

std::optional<BBox> bbox_intersection(const BBox& a, const BBox& b) {
    const double x0 = std::max(a.x0(), b.x0());
    const double y0 = std::max(a.y0(), b.y0());
    const double x1 = std::min(a.x1(), b.x1());
    const double y1 = std::min(a.y1(), b.y1());
    if (x0 > x1 || y0 > y1) return std::nullopt;
    return BBox(x0, y0, x1, y1);
}

double bbox_gap(const BBox& a, const BBox& b) {
    const double dx = std::max(0.0, std::max(a.x0() - b.x1(), b.x0() - a.x1()));
    const double dy = std::max(0.0, std::max(a.y0() - b.y1(), b.y0() - a.y1()));
    return std::sqrt(dx * dx + dy * dy);
}

double Scene::diagonal() const {
    return std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
}

const Entity* Scene::find(std::string_view entity_id) const {
    for (const auto& e : entities) {
        if (e.id == entity_id) return &e;
    }
    return nullptr;
}

double area_fraction(const BBox& b, const Scene& scene) {
    if (!scene.bounds().contains(b)) {
        std::ostringstream os;
        os << "box (" << b.x0() << "," << b.y0() << "," << b.x1() << "," << b.y1()
           << ") outside scene " << scene.id;
        throw Error::domain(os.str());
    }
    return b.area() / (static_cast<double>(scene.width) * scene.height);
}

void check_scene(const Scene& scene) {
    if (scene.width <= 0 || scene.height <= 0) {
        throw Error::parse("scene " + scene.id + ": width and height must be positive");
    }
    std::set<std::string, std::less<>> ids;
    const BBox bounds = scene.bounds();
    for (const auto& e : scene.entities) {
        const std::string where = "scene " + scene.id + " entity " + e.id;
        if (!ids.insert(e.id).second) throw Error::parse(where + ": duplicate entity id");
        if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
            throw Error::parse(where + ": confidence outside [0,1]");
        }
        if (!bounds.contains(e.bbox)) throw Error::parse(where + ": bbox outside scene bounds");
    }
}

// ---------------------------------------------------------------- SceneSet

SceneSet::SceneSet(std::vector<Scene> scenes) {
    auto index = std::make_shared<std::map<std::string, std::size_t, std::less<>>>();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (!index->emplace(scenes[i].id, i).second) {
            throw Error::parse("duplicate scene id " + scenes[i].id);
        }
    }
    scenes_ = std::make_shared<const std::vector<Scene>>(std::move(scenes));
    index_ = std::move(index);
}

const Scene* SceneSet::find(std::string_view id) const {
    auto it = index_->find(id);
    return it == index_->end() ? nullptr : &(*scenes_)[it->second];
}

const Scene& SceneSet::at(std::string_view id) const {
    if (const Scene* s = find(id)) return *s;
    throw Error::precondition("unknown scene id " + std::string(id));
}

// ---------------------------------------------------------------- JSON

Json bbox_to_json(const BBox& b) { return Json::array({b.x0(), b.y0(), b.x1(), b.y1()}); }

BBox bbox_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw Error::parse("bbox must be [x0,y0,x1,y1]");
    for (const auto& v : j) {
        if (!v.is_number()) throw Error::parse("bbox coordinates must be numbers");
    }
    return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

namespace {

Json optional_string(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

Json entity_to_json(const Entity& e) {
    Json j;
    j["id"] = e.id;
    j["label"] = e.label;
    j["bbox"] = bbox_to_json(e.bbox);
    j["confidence"] = e.confidence;
    j["color"] = optional_string(e.color);
    j["text"] = e.text;
    return j;
}

std::string record_name(std::size_t scene_index, std::optional<std::size_t> entity_index = {}) {
    std::string s = "scenes[" + std::to_string(scene_index) + "]";
    if (entity_index) s += ".entities[" + std::to_string(*entity_index) + "]";
    return s;
}

const Json& require(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error::parse(where + ": missing '" + key + "'");
    }
    return obj.at(key);
}

std::string require_string(const Json& obj, const char* key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (!v.is_string()) throw Error::parse(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

std::optional<std::string> optional_string_field(const Json& obj, const char* key,
                                                 const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string()) throw Error::parse(where + ": '" + key + "' must be a string or null");
    return obj.at(key).get<std::string>();
}

int require_dimension(const Json& obj, const char* key, const std::string& where) {
    const Json& v = require(obj, key, where);
    if (!v.is_number_integer()) throw Error::parse(where + ": '" + key + "' must be an integer");
    return v.get<int>();
}

std::vector<std::string> text_field(const Json& obj, const std::string& where, bool required) {
    if (!obj.contains("text")) {
        if (required) throw Error::parse(where + ": missing 'text'");
        return {};
    }
    const Json& t = obj.at("text");
    if (!t.is_array()) throw Error::parse(where + ": 'text' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& s : t) {
        if (!s.is_string()) throw Error::parse(where + ": 'text' must be an array of strings");
        out.push_back(s.get<std::string>());
    }
    return out;
}

const Json& scenes_array(const Json& doc) {
    if (!doc.is_object() || !doc.contains("scenes") || !doc.at("scenes").is_array()) {
        throw Error::parse("top level must be an object with a 'scenes' array");
    }
    return doc.at("scenes");
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error::parse(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

Json scene_to_json(const Scene& s) {
    Json j;
    j["id"] = s.id;
    j["width"] = s.width;
    j["height"] = s.height;
    j["image_ref"] = optional_string(s.image_ref);
    j["caption"] = optional_string(s.caption);
    Json ents = Json::array();
    for (const auto& e : s.entities) ents.push_back(entity_to_json(e));
    j["entities"] = std::move(ents);
    return j;
}

Json sceneset_to_json(const SceneSet& set) {
    Json arr = Json::array();
    for (const auto& s : set.scenes()) arr.push_back(scene_to_json(s));
    Json doc;
    doc["scenes"] = std::move(arr);
    return doc;
}

std::string serialize_scenes(const SceneSet& set) { return sceneset_to_json(set).dump(1) + "\n"; }

SceneSet parse_scenes(std::string_view text) {
    const Json doc = parse_json(text);
    const Json& arr = scenes_array(doc);
    std::vector<Scene> scenes;
    scenes.reserve(arr.size());
    for (std::size_t si = 0; si < arr.size(); ++si) {
        const Json& js = arr[si];
        const std::string where = record_name(si);
        Scene s;
        s.id = require_string(js, "id", where);
        s.width = require_dimension(js, "width", where);
        s.height = require_dimension(js, "height", where);
        s.image_ref = optional_string_field(js, "image_ref", where);
        s.caption = optional_string_field(js, "caption", where);
        const Json& ents = require(js, "entities", where);
        if (!ents.is_array()) throw Error::parse(where + ": 'entities' must be an array");
        for (std::size_t ei = 0; ei < ents.size(); ++ei) {
            const std::string ewhere = record_name(si, ei);
            const Json& je = ents[ei];
            Entity e;
            e.id = require_string(je, "id", ewhere);
            e.label = require_string(je, "label", ewhere);
            try {
                e.bbox = bbox_from_json(require(je, "bbox", ewhere));
            } catch (const Error& err) {
                throw Error::parse(ewhere + ": " + err.what());
            }
            const Json& conf = require(je, "confidence", ewhere);
            if (!conf.is_number()) throw Error::parse(ewhere + ": 'confidence' must be a number");
            e.confidence = conf.get<double>();
            e.color = optional_string_field(je, "color", ewhere);
            e.text = text_field(je, ewhere, false);
            s.entities.push_back(std::move(e));
        }
        check_scene(s);
        scenes.push_back(std::move(s));
    }
    return SceneSet(std::move(scenes));
}

ImportResult import_detections(std::string_view text) {
    const Json doc = parse_json(text);
    const Json& arr = scenes_array(doc);
    ImportResult result;
    std::vector<Scene> scenes;
    for (std::size_t si = 0; si < arr.size(); ++si) {
        const Json& js = arr[si];
        const std::string where = record_name(si);
        Scene s;
        s.id = require_string(js, "id", where);
        s.width = require_dimension(js, "width", where);
        s.height = require_dimension(js, "height", where);
        if (s.width <= 0 || s.height <= 0) throw Error::parse(where + ": width and height must be positive");
        s.image_ref = optional_string_field(js, "image_ref", where);
        s.caption = optional_string_field(js, "caption", where);
        const Json& ents = require(js, "entities", where);
        if (!ents.is_array()) throw Error::parse(where + ": 'entities' must be an array");
        std::set<std::string, std::less<>> ids;
        for (std::size_t ei = 0; ei < ents.size(); ++ei) {
            const std::string ewhere = record_name(si, ei);
            const Json& je = ents[ei];
            Entity e;
            e.id = require_string(je, "id", ewhere);
            e.label = require_string(je, "label", ewhere);
            const Json& jb = require(je, "bbox", ewhere);
            if (!jb.is_array() || jb.size() != 4 ||
                !std::all_of(jb.begin(), jb.end(), [](const Json& v) { return v.is_number(); })) {
                throw Error::parse(ewhere + ": bbox must be [x0,y0,x1,y1]");
            }
            const Json& conf = require(je, "confidence", ewhere);
            if (!conf.is_number()) throw Error::parse(ewhere + ": 'confidence' must be a number");
            e.color = optional_string_field(je, "color", ewhere);
            e.text = text_field(je, ewhere, false);

            auto reject = [&](const std::string& why) {
                spdlog::warn("import: rejected {} ({})", ewhere, why);
                result.rejected.push_back(ewhere + ": " + why);
            };
            const double x0 = jb[0].get<double>(), y0 = jb[1].get<double>();
            const double x1 = jb[2].get<double>(), y1 = jb[3].get<double>();
            if (x1 < x0 || y1 < y0) {
                reject("negative-size bbox");
                continue;
            }
            e.bbox = BBox(x0, y0, x1, y1);
            e.confidence = conf.get<double>();
            if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
                reject("confidence outside [0,1]");
                continue;
            }
            if (!s.bounds().contains(e.bbox)) {
                reject("bbox outside image bounds");
                continue;
            }
            if (!ids.insert(e.id).second) {
                reject("duplicate entity id");
                continue;
            }
            s.entities.push_back(std::move(e));
        }
        scenes.push_back(std::move(s));
    }
    result.scenes = SceneSet(std::move(scenes));
    return result;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error::io("cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error::io("short write to " + path);
}

SceneSet load_scenes(const std::string& path) { return parse_scenes(read_file(path)); }

void save_scenes(const SceneSet& set, const std::string& path) { write_file(path, serialize_scenes(set)); }

ImportResult import_detections_file(const std::string& path) { return import_detections(read_file(path)); }

// ---------------------------------------------------------------- generator

namespace {

constexpr std::array<std::string_view, 6> kContainers{"bus", "truck", "car", "van", "storefront", "train"};
constexpr std::array<std::string_view, 4> kParts{"sign", "plate", "banner", "poster"};
constexpr std::array<std::string_view, 6> kCompanions{"person", "bicycle", "dog", "bench", "umbrella",
                                                      "suitcase"};
constexpr std::array<std::string_view, 8> kLoose{"cup", "clock", "kite", "bottle", "laptop", "chair",
                                                 "vase", "motorcycle"};
constexpr std::array<std::string_view, 3> kDistractors{"bird", "frisbee", "handbag"};
constexpr std::array<std::string_view, 11> kPalette{"red",  "orange", "yellow", "green", "blue", "purple",
                                                    "pink", "brown",  "black",  "white", "gray"};
constexpr std::array<std::string_view, 24> kTexts{
    "BWI AIRPORT", "CURLY DICK RD", "TARANA 13", "OBERON 39", "MAIN ST",   "EXIT 12",
    "OPEN",        "CAFE",          "ROUTE 66",  "NO PARKING", "BAKERY",   "PLATFORM 4",
    "GATE B12",    "HOTEL",         "PIZZA",     "ELM AVE",    "LOT 7",    "TAXI",
    "ONE WAY",     "DOCK 3",        "SALE",      "KINGS CROSS", "PIER 39", "MARKET"};

struct Cell {
    double x0, y0, x1, y1;
};

class SceneBuilder {
public:
    SceneBuilder(Scene& scene, Rng& rng) : scene_(scene), rng_(rng) {}

    template <std::size_t N>
    std::string pick(const std::array<std::string_view, N>& pool) {
        return std::string(pool[rng_.index(N)]);
    }

    std::string fresh_text() {
        for (int tries = 0; tries < 64; ++tries) {
            std::string t = pick(kTexts);
            if (used_text_.insert(t).second) return t;
        }
        return "NO " + std::to_string(used_text_.size());
    }

    Entity& add(std::string label, double x0, double y0, double x1, double y1, double confidence) {
        Entity e;
        e.id = "e" + std::to_string(scene_.entities.size());
        e.label = std::move(label);
        e.bbox = BBox(std::round(x0), std::round(y0), std::round(x1), std::round(y1));
        e.confidence = confidence;
        scene_.entities.push_back(std::move(e));
        return scene_.entities.back();
    }

    double confidence() { return std::round(rng_.uniform(0.55, 0.99) * 100.0) / 100.0; }

    void cluster(const Cell& c) {
        const double cw = rng_.uniform(78, 100);
        const double ch = rng_.uniform(70, 110);
        const double cx0 = c.x0 + rng_.uniform(0, 8);
        const double cy0 = c.y0 + rng_.uniform(0, std::max(0.0, (c.y1 - c.y0) - ch));
        Entity& container = add(pick(kContainers), cx0, cy0, cx0 + cw, cy0 + ch, confidence());
        container.color = pick(kPalette);
        const BBox cb = container.bbox;

        const int parts = rng_.between(1, 2);
        for (int p = 0; p < parts; ++p) {
            const double pw = rng_.uniform(20, 34);
            const double ph = rng_.uniform(12, 20);
            // stack parts vertically so they do not overlap
            const double band = cb.height() / parts;
            const double px0 = cb.x0() + rng_.uniform(3, std::max(3.0, cb.width() - pw - 3));
            const double py0 = cb.y0() + band * p + rng_.uniform(2, std::max(2.0, band - ph - 2));
            Entity& part = add(pick(kParts), px0, py0, px0 + pw, py0 + ph, confidence());
            part.color = pick(kPalette);
            part.text.push_back(fresh_text());
        }

        const int companions = rng_.between(1, 2);
        double next_x = cb.x1() + rng_.uniform(0, 12);
        for (int k = 0; k < companions && next_x + 20 < c.x1; ++k) {
            const double w = std::min(rng_.uniform(20, 32), c.x1 - next_x);
            const double h = rng_.uniform(36, 70);
            const double y0 = cb.y0() + rng_.uniform(0, std::max(0.0, cb.height() - h * 0.5));
            const double y1 = std::min(y0 + h, c.y1);
            Entity& comp = add(pick(kCompanions), next_x, y0, next_x + w, y1, confidence());
            if (rng_.chance(0.85)) comp.color = pick(kPalette);
            next_x += w + rng_.uniform(0, 10);
        }
    }

    void loose(const Cell& c) {
        const double w = rng_.uniform(28, std::min(90.0, c.x1 - c.x0));
        const double h = rng_.uniform(28, std::min(90.0, c.y1 - c.y0));
        const double x0 = c.x0 + rng_.uniform(0, (c.x1 - c.x0) - w);
        const double y0 = c.y0 + rng_.uniform(0, (c.y1 - c.y0) - h);
        const bool text_sign = rng_.chance(0.25);
        Entity& e = add(text_sign ? std::string("sign") : pick(kLoose), x0, y0, x0 + w, y0 + h, confidence());
        if (rng_.chance(0.9)) e.color = pick(kPalette);
        if (text_sign) e.text.push_back(fresh_text());
    }

    void distractor() {
        const double w = rng_.uniform(10, 30);
        const double h = rng_.uniform(10, 30);
        const double x0 = rng_.uniform(0, scene_.width - w);
        const double y0 = rng_.uniform(0, scene_.height - h);
        const double conf = std::round(rng_.uniform(0.2, 0.5) * 100.0) / 100.0;
        Entity& e = add(pick(kDistractors), x0, y0, x0 + w, y0 + h, conf);
        e.color = pick(kPalette);
    }

private:
    Scene& scene_;
    Rng& rng_;
    std::set<std::string, std::less<>> used_text_;
};

}  // namespace

SceneSet generate_scenes(const SceneGenOptions& options) {
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(std::max(0, options.count)));
    // 3x2 grid; a 25px margin inside each cell keeps items in different
    // cells more than 50px apart.
    constexpr int kCols = 3, kRows = 2;
    constexpr double kMargin = 25.0;
    for (int i = 0; i < options.count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "scene-%04d", i);
        Scene s;
        s.id = id;
        s.width = options.width;
        s.height = options.height;
        Rng rng(mix_seed(options.seed, s.id));
        SceneBuilder builder(s, rng);

        std::vector<int> cells(kCols * kRows);
        for (int c = 0; c < kCols * kRows; ++c) cells[c] = c;
        rng.shuffle(cells);
        const int clusters = rng.between(2, 3);
        const int loose = rng.between(1, 2);
        const double cw = static_cast<double>(s.width) / kCols;
        const double ch = static_cast<double>(s.height) / kRows;
        for (int k = 0; k < clusters + loose; ++k) {
            const int col = cells[k] % kCols, row = cells[k] / kCols;
            const Cell cell{col * cw + kMargin, row * ch + kMargin, (col + 1) * cw - kMargin,
                            (row + 1) * ch - kMargin};
            if (k < clusters) {
                builder.cluster(cell);
            } else {
                builder.loose(cell);
            }
        }
        if (rng.chance(options.low_confidence_rate * 4)) builder.distractor();
        check_scene(s);
        scenes.push_back(std::move(s));
    }
    return SceneSet(std::move(scenes));
}

}  // namespace reasonforge
