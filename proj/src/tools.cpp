#include "reasonforge/tools.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "reasonforge/colors.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/kernels.hpp"
#include "reasonforge/questions.hpp"
#include "reasonforge/text.hpp"

namespace reasonforge {

const char* to_string(ToolKind kind) {
    switch (kind) {
        case ToolKind::Grounding: return "grounding";
        case ToolKind::Highlight: return "highlight";
        case ToolKind::OCR: return "ocr";
        case ToolKind::Answer: return "answer";
    }
    return "unknown";
}

ToolKind tool_from_string(std::string_view name) {
    const std::string n = text::lower(name);
    for (auto k : kAllTools) {
        if (n == to_string(k)) return k;
    }
    throw Error::parse("unknown tool '" + std::string(name) + "'");
}

void check_invocation(const ToolInvocation& inv) {
    const char* name = to_string(inv.kind);
    auto fail = [&](const std::string& why) { throw Error::precondition(std::string(name) + ": " + why); };
    switch (inv.kind) {
        case ToolKind::Grounding:
        case ToolKind::Highlight:
            if (inv.target_entity.empty()) fail("target_entity is required");
            if (!inv.question.empty() || !inv.characters.empty()) fail("only target_entity is accepted");
            break;
        case ToolKind::OCR:
            if (!inv.target_entity.empty() || !inv.question.empty() || !inv.characters.empty()) {
                fail("takes no arguments");
            }
            break;
        case ToolKind::Answer:
            if (inv.question.empty()) fail("question is required");
            if (!inv.target_entity.empty()) fail("target_entity is not accepted");
            break;
    }
}

Json invocation_to_json(const ToolInvocation& inv) {
    Json j;
    j["tool"] = to_string(inv.kind);
    Json args = Json::object();
    if (inv.kind == ToolKind::Grounding || inv.kind == ToolKind::Highlight) args["target_entity"] = inv.target_entity;
    if (inv.kind == ToolKind::Answer) {
        args["question"] = inv.question;
        args["characters"] = inv.characters;
    }
    j["args"] = std::move(args);
    return j;
}

namespace {

ToolInvocation invocation_from_parts(const Json& tool, const Json& args) {
    if (!tool.is_string()) throw Error::parse("'tool' must be a string");
    ToolInvocation inv;
    inv.kind = tool_from_string(tool.get<std::string>());
    if (!args.is_null() && !args.is_object()) throw Error::parse("'args' must be an object");
    try {
        if (args.is_object()) {
            if (args.contains("target_entity") && !args.at("target_entity").is_null()) {
                inv.target_entity = args.at("target_entity").get<std::string>();
            }
            if (args.contains("question") && !args.at("question").is_null()) {
                inv.question = args.at("question").get<std::string>();
            }
            if (args.contains("characters") && !args.at("characters").is_null()) {
                inv.characters = args.at("characters").get<std::vector<std::string>>();
            }
        }
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("invocation args: ") + e.what());
    }
    return inv;
}

}  // namespace

ToolInvocation invocation_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("tool")) throw Error::parse("invocation must carry 'tool'");
    return invocation_from_parts(j.at("tool"), j.contains("args") ? j.at("args") : Json());
}

OutputClass output_class(const ToolOutput& out) {
    return std::holds_alternative<ImageOut>(out) ? OutputClass::Image : OutputClass::Text;
}

Json output_to_json(const ToolOutput& out) {
    Json j;
    if (const auto* img = std::get_if<ImageOut>(&out)) {
        j["kind"] = "image";
        j["view"] = view_to_json(img->view);
    } else if (const auto* txt = std::get_if<TextOut>(&out)) {
        j["kind"] = "text";
        j["items"] = txt->items;
    } else {
        j["kind"] = "answer";
        j["answer"] = std::get<AnswerOut>(out).answer;
    }
    return j;
}

ToolOutput output_from_json(const Json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "image") return ImageOut{view_from_json(j.at("view"))};
        if (kind == "text") return TextOut{j.at("items").get<std::vector<std::string>>()};
        if (kind == "answer") return AnswerOut{j.at("answer").get<std::string>()};
        throw Error::parse("unknown output kind '" + kind + "'");
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("tool output: ") + e.what());
    }
}

std::string summarize(const ToolOutput& out) {
    if (const auto* img = std::get_if<ImageOut>(&out)) {
        return "image: " + std::to_string(img->view.count(AnnotationKind::Mark)) + " mark(s), " +
               std::to_string(img->view.count(AnnotationKind::Highlight)) + " highlight(s)";
    }
    if (const auto* txt = std::get_if<TextOut>(&out)) {
        std::string s = "text: [";
        for (std::size_t i = 0; i < txt->items.size(); ++i) {
            if (i) s += ", ";
            s += "\"" + txt->items[i] + "\"";
        }
        return s + "]";
    }
    return "answer: " + std::get<AnswerOut>(out).answer;
}

void ToolBackendBinding::check() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error::config("alpha must lie in (0,1]");
    if (max_in_flight < 1) throw Error::config("max_in_flight must be >= 1");
}

// ---------------------------------------------------------------- preprocessing

ViewState preprocess_for_tool(const ViewState& view, ToolKind kind, double alpha, const Scene& scene) {
    if (!is_inferring(kind)) return view;
    const Annotation* mark = view.last_mark();
    if (!mark || mark->rect.area() <= 0.0) return view;
    if (area_fraction(mark->rect, scene) < alpha) return crop_zoom(view, mark->rect);
    return view;
}

// ---------------------------------------------------------------- oracle

namespace {

kernels::BoxColumns columns_of(const Scene& scene) {
    kernels::BoxColumns cols;
    cols.reserve(scene.entities.size());
    for (const auto& e : scene.entities) cols.push_back(e.bbox.x0(), e.bbox.y0(), e.bbox.x1(), e.bbox.y1());
    return cols;
}

std::vector<const Entity*> in_view(const Scene& scene, const BBox& viewport) {
    const auto cols = columns_of(scene);
    std::vector<std::uint8_t> mask(cols.size());
    kernels::active().overlap(cols, {viewport.x0(), viewport.y0(), viewport.x1(), viewport.y1()}, mask);
    std::vector<const Entity*> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.push_back(&scene.entities[i]);
    }
    return out;
}

void sort_by_prominence(std::vector<const Entity*>& v) {
    std::stable_sort(v.begin(), v.end(), [](const Entity* a, const Entity* b) {
        const double aa = a->bbox.area(), ba = b->bbox.area();
        if (aa != ba) return aa > ba;
        return a->id < b->id;
    });
}

BBox clip(const BBox& b, const BBox& viewport) {
    auto c = bbox_intersection(b, viewport);
    return c ? *c : b;
}

}  // namespace

std::vector<const Entity*> oracle_match(const Scene& scene, const BBox& viewport, std::string_view target) {
    const auto toks = text::tokens(target);
    std::set<std::string, std::less<>> named_colors;
    for (const auto& t : toks) {
        if (is_known_color(t)) named_colors.insert(t);
    }
    std::vector<const Entity*> out;
    for (const Entity* e : in_view(scene, viewport)) {
        if (!text::label_in(e->label, toks)) continue;
        if (!named_colors.empty()) {
            if (!e->color || !named_colors.count(text::lower(*e->color))) continue;
        }
        out.push_back(e);
    }
    sort_by_prominence(out);
    return out;
}

namespace {

const Entity& resolve_subject(const Scene& scene, const ViewState& view, std::string_view ref) {
    const Annotation* mark = view.last_mark();
    if (is_pronoun_ref(ref)) {
        // "it": the marked entity (by reference, else largest under the mark),
        // or the dominant entity in view.
        if (mark) {
            for (const auto& id : mark->ref_entity_ids) {
                if (const Entity* e = scene.find(id); e && e->bbox.overlaps(view.viewport)) return *e;
            }
            auto under = in_view(scene, mark->rect);
            sort_by_prominence(under);
            if (!under.empty()) return *under.front();
        }
        auto all = in_view(scene, view.viewport);
        sort_by_prominence(all);
        if (!all.empty()) return *all.front();
        throw Error::execution("answer: no entity in view");
    }
    auto candidates = oracle_match(scene, view.viewport, ref);
    // narrow to what the annotations single out: the last mark, else highlights
    std::vector<const Entity*> focused;
    for (const Entity* e : candidates) {
        if (mark) {
            if (e->bbox.overlaps(mark->rect)) focused.push_back(e);
            continue;
        }
        const BBox c = clip(e->bbox, view.viewport);
        for (const auto& a : view.annotations) {
            if (a.kind == AnnotationKind::Highlight && a.rect.contains(c)) {
                focused.push_back(e);
                break;
            }
        }
    }
    if (!focused.empty()) candidates = std::move(focused);
    if (candidates.empty()) throw Error::execution("answer: nothing in view matches '" + std::string(ref) + "'");
    return *candidates.front();
}

std::string answer_from_characters(std::string_view question, const std::vector<std::string>& characters) {
    const auto qt = text::tokens(question);
    const std::set<std::string, std::less<>> qset(qt.begin(), qt.end());
    std::vector<std::string> kept;
    for (const auto& c : characters) {
        const auto ct = text::tokens(c);
        const bool echoes = !ct.empty() && std::all_of(ct.begin(), ct.end(), [&](const auto& t) { return qset.count(t) > 0; });
        if (!echoes) kept.push_back(c);
    }
    return text::join(kept.empty() ? characters : kept, " ");
}

}  // namespace

std::string oracle_answer(const Scene& scene, const ViewState& view, std::string_view question,
                          const std::vector<std::string>& characters) {
    const ParsedQuestion pq = parse_question(question);
    switch (pq.form) {
        case QuestionForm::Count: {
            const NounChain chain = split_noun_phrase(pq.np);
            const auto np_tokens = text::tokens(chain.refs.front());
            if (std::find(np_tokens.begin(), np_tokens.end(), "highlighted") != np_tokens.end()) {
                return std::to_string(view.count(AnnotationKind::Highlight));
            }
            const auto matches = oracle_match(scene, view.viewport, chain.refs.front());
            if (view.count(AnnotationKind::Highlight) == 0) return std::to_string(matches.size());
            // count only what the highlights single out
            std::size_t n = 0;
            for (const Entity* e : matches) {
                const BBox c = clip(e->bbox, view.viewport);
                for (const auto& a : view.annotations) {
                    if (a.kind == AnnotationKind::Highlight && a.rect.contains(c)) {
                        ++n;
                        break;
                    }
                }
            }
            return std::to_string(n);
        }
        case QuestionForm::Color: {
            const Entity& e = resolve_subject(scene, view, split_noun_phrase(pq.np).refs.front());
            if (!e.color) throw Error::execution("unanswerable by oracle: " + e.id + " has no color");
            return *e.color;
        }
        default: break;
    }
    if (!characters.empty()) {
        // prefer the subject's own text when the recognized characters include it
        if (pq.form == QuestionForm::Text) {
            try {
                const Entity& e = resolve_subject(scene, view, split_noun_phrase(pq.np).refs.front());
                const bool seen = !e.text.empty() && std::all_of(e.text.begin(), e.text.end(), [&](const auto& t) {
                    return std::find(characters.begin(), characters.end(), t) != characters.end();
                });
                if (seen) return text::join(e.text, " ");
            } catch (const Error&) {
            }
        }
        return answer_from_characters(question, characters);
    }
    if (pq.form == QuestionForm::Text) {
        const Entity& e = resolve_subject(scene, view, split_noun_phrase(pq.np).refs.front());
        if (e.text.empty()) throw Error::execution("unanswerable by oracle: " + e.id + " has no text");
        return text::join(e.text, " ");
    }
    throw Error::execution("unanswerable by oracle: '" + std::string(question) + "'");
}

ToolOutput OracleBackend::execute(const Scene& scene, const ViewState& view, const ToolInvocation& inv) {
    check_invocation(inv);
    switch (inv.kind) {
        case ToolKind::Grounding: {
            auto matches = oracle_match(scene, view.viewport, inv.target_entity);
            if (matches.empty()) throw Error::execution("grounding: no match for '" + inv.target_entity + "'");
            // with a region already marked, the closest candidate wins
            if (const Annotation* mark = view.last_mark()) {
                std::stable_sort(matches.begin(), matches.end(), [&](const Entity* a, const Entity* b) {
                    return bbox_gap(a->bbox, mark->rect) < bbox_gap(b->bbox, mark->rect);
                });
            }
            const Entity* best = matches.front();
            return ImageOut{add_mark(view, clip(best->bbox, view.viewport), {best->id})};
        }
        case ToolKind::Highlight: {
            const auto matches = oracle_match(scene, view.viewport, inv.target_entity);
            std::vector<BBox> rects;
            std::vector<std::string> ids;
            for (const Entity* e : matches) {
                rects.push_back(clip(e->bbox, view.viewport));
                ids.push_back(e->id);
            }
            return ImageOut{add_highlights(view, rects, ids)};
        }
        case ToolKind::OCR: {
            TextOut out;
            for (const Entity* e : in_view(scene, view.viewport)) {
                out.items.insert(out.items.end(), e->text.begin(), e->text.end());
            }
            return out;
        }
        case ToolKind::Answer:
            return AnswerOut{oracle_answer(scene, view, inv.question, inv.characters)};
    }
    throw Error::execution("unknown tool");
}

// ---------------------------------------------------------------- wire protocol

namespace {

// scene <-> attached-image pixel frame
struct Frame {
    BBox viewport;
    double w, h;
    double sx() const { return w / viewport.width(); }
    double sy() const { return h / viewport.height(); }
    Json to_frame(const BBox& b) const {
        return Json::array({(b.x0() - viewport.x0()) * sx(), (b.y0() - viewport.y0()) * sy(),
                            (b.x1() - viewport.x0()) * sx(), (b.y1() - viewport.y0()) * sy()});
    }
    BBox to_scene(const Json& j) const {
        const BBox f = bbox_from_json(j);
        return BBox(viewport.x0() + f.x0() / sx(), viewport.y0() + f.y0() / sy(), viewport.x0() + f.x1() / sx(),
                    viewport.y0() + f.y1() / sy());
    }
};

Frame frame_for(const Scene& scene, const ViewState& view) {
    return Frame{view.viewport, static_cast<double>(scene.width), static_cast<double>(scene.height)};
}

}  // namespace

Json encode_tool_request(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv,
                         bool attach_image) {
    const Json ji = invocation_to_json(inv);
    Json j;
    j["tool"] = ji["tool"];
    j["args"] = ji["args"];
    j["view"] = view_to_json(tool_view);
    j["image_size"] = Json::array({scene.width, scene.height});
    j["image_png_b64"] =
        attach_image ? base64_encode(encode_png(render(scene, tool_view, scene.width, scene.height))) : "";
    return j;
}

ToolOutput decode_tool_response(const Json& response, const Scene& scene, const ViewState& tool_view,
                                ToolKind kind) {
    if (!response.is_object() || !response.contains("ok") || !response.at("ok").is_boolean()) {
        throw Error::execution("malformed response: missing 'ok'");
    }
    if (!response.at("ok").get<bool>()) {
        throw Error::execution("backend error: " + response.value("error", std::string("unspecified")));
    }
    if (!response.contains("output") || !response.at("output").is_object()) {
        throw Error::execution("malformed response: missing 'output'");
    }
    const Json& out = response.at("output");
    const std::string k = out.value("kind", std::string());
    try {
        if (k == "image") {
            if (output_class(kind) != OutputClass::Image) {
                throw Error::execution(std::string(to_string(kind)) + " returned an image");
            }
            const Frame f = frame_for(scene, tool_view);
            ViewState v = tool_view;
            // optional *_refs arrays name the entity behind each rect
            auto refs = [&](const char* key, std::size_t n) {
                std::vector<std::string> ids;
                if (out.contains(key)) ids = out.at(key).get<std::vector<std::string>>();
                if (!ids.empty() && ids.size() != n) throw Error::execution(std::string(key) + " length mismatch");
                return ids;
            };
            if (out.contains("marks")) {
                const Json& marks = out.at("marks");
                const auto ids = refs("mark_refs", marks.size());
                for (std::size_t i = 0; i < marks.size(); ++i) {
                    std::vector<std::string> ref;
                    if (!ids.empty() && !ids[i].empty()) ref.push_back(ids[i]);
                    v = add_mark(v, f.to_scene(marks[i]), std::move(ref));
                }
            }
            if (out.contains("highlights")) {
                std::vector<BBox> rects;
                for (const auto& h : out.at("highlights")) rects.push_back(f.to_scene(h));
                v = add_highlights(v, rects, refs("highlight_refs", rects.size()));
            }
            return ImageOut{std::move(v)};
        }
        if (k == "text") {
            if (output_class(kind) != OutputClass::Text) {
                throw Error::execution(std::string(to_string(kind)) + " returned text");
            }
            auto items = out.at("items").get<std::vector<std::string>>();
            if (kind == ToolKind::Answer) return AnswerOut{text::join(items, " ")};
            return TextOut{std::move(items)};
        }
    } catch (const Json::exception& e) {
        throw Error::execution(std::string("malformed output: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Execution) throw;
        throw Error::execution(std::string("malformed output: ") + e.what());
    }
    throw Error::execution("malformed output kind '" + k + "'");
}

ToolOutput RemoteBackend::execute(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv) {
    check_invocation(inv);
    const std::string who = std::string(to_string(inv.kind)) + " backend at " + transport_->endpoint();
    Json response;
    try {
        response = transport_->call("/v1/tool/invoke", encode_tool_request(scene, tool_view, inv));
    } catch (const Error& e) {
        throw Error::execution(who + ": " + e.what());
    }
    try {
        return decode_tool_response(response, scene, tool_view, inv.kind);
    } catch (const Error& e) {
        throw Error::execution(who + ": " + e.what());
    }
}

Json handle_tool_request(const SceneSet& scenes, const Json& request) {
    Json reply;
    try {
        if (!request.is_object()) throw Error::parse("request must be an object");
        const ToolInvocation inv = invocation_from_parts(request.at("tool"), request.value("args", Json::object()));
        const ViewState view = view_from_json(request.at("view"));
        const Scene& scene = scenes.at(view.scene_id);
        double fw = scene.width, fh = scene.height;
        if (request.contains("image_size")) {
            fw = request.at("image_size").at(0).get<double>();
            fh = request.at("image_size").at(1).get<double>();
        }
        const Frame f{view.viewport, fw, fh};
        OracleBackend oracle;
        const ToolOutput out = oracle.execute(scene, view, inv);
        Json jo;
        if (const auto* img = std::get_if<ImageOut>(&out)) {
            jo["kind"] = "image";
            Json marks = Json::array(), highlights = Json::array();
            Json mark_refs = Json::array(), highlight_refs = Json::array();
            for (std::size_t i = view.annotations.size(); i < img->view.annotations.size(); ++i) {
                const Annotation& a = img->view.annotations[i];
                const bool is_mark = a.kind == AnnotationKind::Mark;
                (is_mark ? marks : highlights).push_back(f.to_frame(a.rect));
                (is_mark ? mark_refs : highlight_refs).push_back(a.ref_entity_ids.empty() ? "" : a.ref_entity_ids[0]);
            }
            jo["marks"] = std::move(marks);
            jo["highlights"] = std::move(highlights);
            jo["mark_refs"] = std::move(mark_refs);
            jo["highlight_refs"] = std::move(highlight_refs);
        } else if (const auto* txt = std::get_if<TextOut>(&out)) {
            jo["kind"] = "text";
            jo["items"] = txt->items;
        } else {
            jo["kind"] = "text";
            jo["items"] = Json::array({std::get<AnswerOut>(out).answer});
        }
        reply["ok"] = true;
        reply["output"] = std::move(jo);
    } catch (const std::exception& e) {
        reply = Json::object();
        reply["ok"] = false;
        reply["error"] = e.what();
    }
    return reply;
}

// ---------------------------------------------------------------- pool

ToolPool::ToolPool(SceneSet scenes, ToolBackendBinding binding)
    : scenes_(std::move(scenes)),
      binding_(std::move(binding)),
      transports_(std::make_shared<TransportPool>(TransportOptions{binding_.max_in_flight, binding_.timeout_ms})) {
    binding_.check();
    auto oracle = std::make_shared<OracleBackend>();
    for (auto k : kAllTools) {
        const BackendChoice& c = binding_.choice(k);
        if (c.is_oracle()) {
            backends_[static_cast<int>(k)] = oracle;
        } else {
            backends_[static_cast<int>(k)] = std::make_shared<RemoteBackend>(transports_->get(c.endpoint));
        }
    }
}

void ToolPool::set_backend(ToolKind kind, std::shared_ptr<ToolBackend> backend) {
    backends_[static_cast<int>(kind)] = std::move(backend);
}

ViewState ToolPool::preprocess(const ViewState& view, ToolKind kind) const {
    return preprocess_for_tool(view, kind, binding_.alpha, scenes_.at(view.scene_id));
}

ToolOutput ToolPool::execute(const ViewState& tool_view, const ToolInvocation& inv) const {
    const Scene& scene = scenes_.at(tool_view.scene_id);
    ToolOutput out = backends_[static_cast<int>(inv.kind)]->execute(scene, tool_view, inv);
    if (output_class(out) != output_class(inv.kind)) {
        throw Error::execution(std::string(to_string(inv.kind)) + ": output class mismatch");
    }
    return out;
}

ToolOutput ToolPool::invoke(const ViewState& view, const ToolInvocation& inv) const {
    check_invocation(inv);
    return execute(preprocess(view, inv.kind), inv);
}

}  // namespace reasonforge
