#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reasonforge/scene.hpp"

namespace fixtures {

inline reasonforge::Entity entity(std::string id, std::string label, double x0, double y0, double x1, double y1,
                                  std::optional<std::string> color = std::nullopt,
                                  std::vector<std::string> text = {}, double confidence = 0.9) {
    reasonforge::Entity e;
    e.id = std::move(id);
    e.label = std::move(label);
    e.bbox = reasonforge::BBox(x0, y0, x1, y1);
    e.color = std::move(color);
    e.text = std::move(text);
    e.confidence = confidence;
    return e;
}

inline reasonforge::Scene scene(std::string id, int w, int h, std::vector<reasonforge::Entity> entities) {
    reasonforge::Scene s;
    s.id = std::move(id);
    s.width = w;
    s.height = h;
    s.entities = std::move(entities);
    return s;
}

/// Bus with a sign on it and a person standing next to it, plus a lone dog.
inline reasonforge::Scene street() {
    return scene("street", 640, 480,
                 {entity("bus", "bus", 100, 100, 400, 300, "red"),
                  entity("sign", "sign", 150, 120, 250, 160, "white", {"NEXT STOP", "BWI AIRPORT"}),
                  entity("person", "person", 405, 180, 440, 300, "blue"),
                  entity("dog", "dog", 560, 400, 600, 440, "black")});
}

}  // namespace fixtures
