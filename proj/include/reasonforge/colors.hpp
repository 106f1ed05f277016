#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

namespace reasonforge {

struct Rgb {
    unsigned char r, g, b;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct NamedColor {
    std::string_view name;
    Rgb rgb;
};

/// Color vocabulary recognized in target phrases and used by the renderer.
std::span<const NamedColor> known_colors();
std::optional<Rgb> color_rgb(std::string_view name);
bool is_known_color(std::string_view name);

inline constexpr Rgb kBackground{255, 255, 255};
inline constexpr Rgb kUnknownFill{128, 128, 128};
inline constexpr Rgb kMarkColor{255, 0, 0};
inline constexpr Rgb kHighlightColor{255, 0, 255};

}  // namespace reasonforge
