#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reasonforge/colors.hpp"
#include "reasonforge/scene.hpp"

namespace reasonforge {

enum class AnnotationKind { Mark, Highlight };

const char* to_string(AnnotationKind kind);

struct Annotation {
    AnnotationKind kind = AnnotationKind::Mark;
    BBox rect;  // scene coordinates
    std::vector<std::string> ref_entity_ids;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// The working image I_k: a viewport onto a scene plus the annotations drawn
/// on it. All operations below are pure and return a new value.
struct ViewState {
    std::string scene_id;
    BBox viewport;
    std::vector<Annotation> annotations;

    const Annotation* last_mark() const;
    std::size_t count(AnnotationKind kind) const;

    friend bool operator==(const ViewState&, const ViewState&) = default;
};

ViewState full_view(const Scene& scene);

/// Appends a Mark. A rect reaching outside the viewport is clipped to it (with
/// a warning); a rect with no overlap at all throws Error(Domain).
ViewState add_mark(const ViewState& view, const BBox& rect, std::vector<std::string> ref_ids = {});

/// Appends one Highlight per rect, clipped like add_mark. `ids[i]`, when
/// present, is the entity referenced by rects[i].
ViewState add_highlights(const ViewState& view, const std::vector<BBox>& rects,
                         const std::vector<std::string>& ids = {});

/// Logical crop-and-enlarge: the viewport becomes `rect` (clipped to the
/// current viewport), annotations outside it are dropped and the rest are
/// clipped. Zero-area rects throw Error(Domain).
ViewState crop_zoom(const ViewState& view, const BBox& rect);

Json view_to_json(const ViewState& view);
ViewState view_from_json(const Json& j);

struct RenderOptions {
    Rgb mark_color = kMarkColor;
    Rgb highlight_color = kHighlightColor;
};

/// RGB8 raster, row-major, 3 bytes per pixel.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Rgb at(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
};

/// Outline stroke width in pixels: max(1, floor(0.02 * min(w, h))).
int stroke_width(int out_w, int out_h);

/// Maps a scene-space rect to raster pixel edges [px0,px1) x [py0,py1).
struct PixelRect {
    int x0, y0, x1, y1;
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};
PixelRect to_pixels(const BBox& rect, const BBox& viewport, int out_w, int out_h);

/// Deterministic raster of the view. With an image_ref the file (PNG or JPEG)
/// is cropped to the viewport and resampled nearest-neighbour; otherwise
/// entities overlapping the viewport are drawn as filled rectangles in scene
/// order. Annotations are drawn last as outlines. Text is never rasterized.
Raster render(const Scene& scene, const ViewState& view, int out_w, int out_h,
              const RenderOptions& options = {});

std::string encode_png(const Raster& raster);
Raster decode_image_file(const std::string& path);

std::string base64_encode(std::string_view bytes);

}  // namespace reasonforge
