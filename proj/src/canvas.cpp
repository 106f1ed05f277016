#include "reasonforge/canvas.hpp"

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>

#include "reasonforge/colors.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/kernels.hpp"

namespace reasonforge {

const char* to_string(AnnotationKind kind) {
    return kind == AnnotationKind::Mark ? "mark" : "highlight";
}

const Annotation* ViewState::last_mark() const {
    for (auto it = annotations.rbegin(); it != annotations.rend(); ++it) {
        if (it->kind == AnnotationKind::Mark) return &*it;
    }
    return nullptr;
}

std::size_t ViewState::count(AnnotationKind kind) const {
    return static_cast<std::size_t>(std::count_if(annotations.begin(), annotations.end(),
                                                  [kind](const Annotation& a) { return a.kind == kind; }));
}

ViewState full_view(const Scene& scene) { return ViewState{scene.id, scene.bounds(), {}}; }

namespace {

BBox clip_to_viewport(const ViewState& view, const BBox& rect, const char* what) {
    if (view.viewport.contains(rect)) return rect;
    auto clipped = bbox_intersection(view.viewport, rect);
    if (!clipped) throw Error::domain(std::string(what) + " lies entirely outside the viewport");
    spdlog::warn("{} ({},{},{},{}) clipped to viewport", what, rect.x0(), rect.y0(), rect.x1(), rect.y1());
    return *clipped;
}

}  // namespace

ViewState add_mark(const ViewState& view, const BBox& rect, std::vector<std::string> ref_ids) {
    ViewState out = view;
    out.annotations.push_back(
        Annotation{AnnotationKind::Mark, clip_to_viewport(view, rect, "mark"), std::move(ref_ids)});
    return out;
}

ViewState add_highlights(const ViewState& view, const std::vector<BBox>& rects,
                         const std::vector<std::string>& ids) {
    ViewState out = view;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        std::vector<std::string> refs;
        if (i < ids.size() && !ids[i].empty()) refs.push_back(ids[i]);
        out.annotations.push_back(Annotation{AnnotationKind::Highlight,
                                             clip_to_viewport(view, rects[i], "highlight"), std::move(refs)});
    }
    return out;
}

ViewState crop_zoom(const ViewState& view, const BBox& rect) {
    auto target = bbox_intersection(view.viewport, rect);
    if (!target || target->area() <= 0.0) throw Error::domain("crop rect has zero area inside the viewport");
    ViewState out;
    out.scene_id = view.scene_id;
    out.viewport = *target;
    for (const auto& a : view.annotations) {
        auto clipped = bbox_intersection(a.rect, *target);
        if (!clipped) continue;
        // a positive-area annotation that only touches the new viewport is dropped
        if (clipped->area() <= 0.0 && a.rect.area() > 0.0) continue;
        out.annotations.push_back(Annotation{a.kind, *clipped, a.ref_entity_ids});
    }
    return out;
}

// ---------------------------------------------------------------- JSON

Json view_to_json(const ViewState& view) {
    Json j;
    j["scene_id"] = view.scene_id;
    j["viewport"] = bbox_to_json(view.viewport);
    Json anns = Json::array();
    for (const auto& a : view.annotations) {
        Json ja;
        ja["kind"] = to_string(a.kind);
        ja["rect"] = bbox_to_json(a.rect);
        ja["ref_entity_ids"] = a.ref_entity_ids;
        anns.push_back(std::move(ja));
    }
    j["annotations"] = std::move(anns);
    return j;
}

ViewState view_from_json(const Json& j) {
    if (!j.is_object()) throw Error::parse("view must be an object");
    ViewState v;
    try {
        if (j.contains("scene_id")) v.scene_id = j.at("scene_id").get<std::string>();
        v.viewport = bbox_from_json(j.at("viewport"));
        if (j.contains("annotations")) {
            for (const auto& ja : j.at("annotations")) {
                Annotation a;
                const std::string kind = ja.at("kind").get<std::string>();
                if (kind == "mark") {
                    a.kind = AnnotationKind::Mark;
                } else if (kind == "highlight") {
                    a.kind = AnnotationKind::Highlight;
                } else {
                    throw Error::parse("unknown annotation kind '" + kind + "'");
                }
                a.rect = bbox_from_json(ja.at("rect"));
                if (ja.contains("ref_entity_ids")) {
                    a.ref_entity_ids = ja.at("ref_entity_ids").get<std::vector<std::string>>();
                }
                v.annotations.push_back(std::move(a));
            }
        }
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("view: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse) throw;
        throw Error::parse(std::string("view: ") + e.what());
    }
    return v;
}

// ---------------------------------------------------------------- raster

int stroke_width(int out_w, int out_h) {
    return std::max(1, static_cast<int>(std::floor(0.02 * std::min(out_w, out_h))));
}

PixelRect to_pixels(const BBox& rect, const BBox& viewport, int out_w, int out_h) {
    const double sx = out_w / viewport.width();
    const double sy = out_h / viewport.height();
    auto px = [&](double x) {
        return static_cast<int>(std::clamp<long>(std::lround((x - viewport.x0()) * sx), 0L, long(out_w)));
    };
    auto py = [&](double y) {
        return static_cast<int>(std::clamp<long>(std::lround((y - viewport.y0()) * sy), 0L, long(out_h)));
    };
    return {px(rect.x0()), py(rect.y0()), px(rect.x1()), py(rect.y1())};
}

namespace {

void fill_rect(Raster& r, const PixelRect& p, Rgb c) {
    const auto& k = kernels::active();
    const int x0 = std::max(0, p.x0), x1 = std::min(r.width, p.x1);
    const int y0 = std::max(0, p.y0), y1 = std::min(r.height, p.y1);
    if (x0 >= x1 || y0 >= y1) return;
    for (int y = y0; y < y1; ++y) {
        k.fill_rgb(&r.pixels[(static_cast<std::size_t>(y) * r.width + x0) * 3], static_cast<std::size_t>(x1 - x0),
                   c.r, c.g, c.b);
    }
}

void outline_rect(Raster& r, const PixelRect& p, int stroke, Rgb c) {
    if (p.x0 >= p.x1 || p.y0 >= p.y1) return;
    const int sx = std::min(stroke, p.x1 - p.x0);
    const int sy = std::min(stroke, p.y1 - p.y0);
    fill_rect(r, {p.x0, p.y0, p.x1, p.y0 + sy}, c);
    fill_rect(r, {p.x0, p.y1 - sy, p.x1, p.y1}, c);
    fill_rect(r, {p.x0, p.y0, p.x0 + sx, p.y1}, c);
    fill_rect(r, {p.x1 - sx, p.y0, p.x1, p.y1}, c);
}

void blit_image(Raster& out, const Raster& img, const Scene& scene, const BBox& viewport) {
    // scene coordinates -> image pixels (files may not match the declared size)
    const double ix = static_cast<double>(img.width) / scene.width;
    const double iy = static_cast<double>(img.height) / scene.height;
    const double vx0 = viewport.x0() * ix, vy0 = viewport.y0() * iy;
    const double vw = viewport.width() * ix, vh = viewport.height() * iy;
    for (int y = 0; y < out.height; ++y) {
        const int srcy = std::clamp(static_cast<int>(std::floor(vy0 + (y + 0.5) * vh / out.height)), 0,
                                    img.height - 1);
        for (int x = 0; x < out.width; ++x) {
            const int srcx = std::clamp(static_cast<int>(std::floor(vx0 + (x + 0.5) * vw / out.width)), 0,
                                        img.width - 1);
            const std::size_t s = (static_cast<std::size_t>(srcy) * img.width + srcx) * 3;
            const std::size_t d = (static_cast<std::size_t>(y) * out.width + x) * 3;
            out.pixels[d] = img.pixels[s];
            out.pixels[d + 1] = img.pixels[s + 1];
            out.pixels[d + 2] = img.pixels[s + 2];
        }
    }
}

}  // namespace

Raster render(const Scene& scene, const ViewState& view, int out_w, int out_h, const RenderOptions& options) {
    if (out_w <= 0 || out_h <= 0) throw Error::domain("render size must be positive");
    if (view.viewport.width() <= 0 || view.viewport.height() <= 0) {
        throw Error::domain("cannot render a zero-area viewport");
    }
    Raster r;
    r.width = out_w;
    r.height = out_h;
    r.pixels.resize(static_cast<std::size_t>(out_w) * out_h * 3);

    if (scene.image_ref) {
        const Raster img = decode_image_file(*scene.image_ref);
        blit_image(r, img, scene, view.viewport);
    } else {
        kernels::active().fill_rgb(r.pixels.data(), static_cast<std::size_t>(out_w) * out_h, kBackground.r,
                                   kBackground.g, kBackground.b);
        for (const auto& e : scene.entities) {
            if (!e.bbox.overlaps(view.viewport)) continue;
            Rgb fill = kUnknownFill;
            if (e.color) {
                if (auto rgb = color_rgb(*e.color)) {
                    fill = *rgb;
                } else {
                    spdlog::warn("render: unknown color '{}' on {} drawn mid-gray", *e.color, e.id);
                }
            }
            fill_rect(r, to_pixels(e.bbox, view.viewport, out_w, out_h), fill);
        }
    }

    const int stroke = stroke_width(out_w, out_h);
    for (const auto& a : view.annotations) {
        const Rgb c = a.kind == AnnotationKind::Mark ? options.mark_color : options.highlight_color;
        outline_rect(r, to_pixels(a.rect, view.viewport, out_w, out_h), stroke, c);
    }
    return r;
}

std::string encode_png(const Raster& raster) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.pixels.data(), 0, nullptr)) {
        throw Error::io(std::string("png encode: ") + image.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, raster.pixels.data(), 0, nullptr)) {
        throw Error::io(std::string("png encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

namespace {

Raster decode_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw Error::io("cannot read image " + path + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    Raster r;
    r.width = static_cast<int>(image.width);
    r.height = static_cast<int>(image.height);
    r.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error::io("cannot decode image " + path + ": " + image.message);
    }
    return r;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Raster decode_jpeg(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw Error::io("cannot read image " + path);
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    Raster r;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw Error::io("cannot decode image " + path + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    r.width = static_cast<int>(cinfo.output_width);
    r.height = static_cast<int>(cinfo.output_height);
    r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = &r.pixels[static_cast<std::size_t>(cinfo.output_scanline) * r.width * 3];
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return r;
}

}  // namespace

Raster decode_image_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw Error::io("missing image file " + path);
    unsigned char magic[4] = {};
    const std::size_t n = std::fread(magic, 1, sizeof magic, f);
    std::fclose(f);
    if (n >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') return decode_png(path);
    if (n >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return decode_jpeg(path);
    throw Error::io("unsupported image format: " + path);
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

}  // namespace reasonforge
