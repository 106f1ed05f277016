// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Oracle backends only; no network, no models.

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "reasonforge/dataset.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/evalharness.hpp"
#include "reasonforge/random.hpp"
#include "reasonforge/reasoner.hpp"
#include "reasonforge/synthesis.hpp"
#include "reasonforge/text.hpp"

using namespace reasonforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string sha256_file(const fs::path& p) {
    const std::string data = read_file(p.string());
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("reasonforge_acceptance_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Shared corpus: 200 generated scenes, seed 42, 5 paths per scene.
struct Corpus {
    SceneSet scenes;
    std::vector<ReasoningPath> paths;
    double synth_seconds = 0;
    std::vector<Trace> traces;
};

Corpus& corpus() {
    static Corpus c = [] {
        Corpus out;
        out.scenes = generate_scenes({.count = 200, .seed = 42});
        GeneratorBinding g;
        g.rng_seed = 42;
        SynthesisOptions o;
        o.per_scene = 5;
        o.parallelism = 1;
        const auto t0 = Clock::now();
        out.paths = synthesize_dataset(out.scenes, g, o);
        out.synth_seconds = seconds_since(t0);
        return out;
    }();
    return c;
}

// ---------------------------------------------------------------- criteria

Outcome synthesis_quality() {
    const Corpus& c = corpus();
    std::size_t failed = 0;
    std::string first;
    for (const auto& p : c.paths) {
        const auto r = validate_example(p, c.scenes.at(p.scene_id));
        if (!r.ok()) {
            if (!failed) first = p.id + ": " + text::join(r.diagnostics, "; ");
            ++failed;
        }
    }
    std::ostringstream d;
    d << c.paths.size() << " paths, " << failed << " failing validation, " << c.synth_seconds << " s";
    if (!first.empty()) d << " (first: " << first << ")";
    return {c.paths.size() == 1000 && failed == 0 && c.synth_seconds < 60.0, d.str()};
}

Outcome round_trip() {
    Corpus& c = corpus();
    const ToolPool pool(c.scenes, ToolBackendBinding::oracle());
    c.traces.clear();
    std::size_t not_answered = 0, wrong = 0;
    for (const auto& p : c.paths) {
        ScriptedPolicy policy(script_of(p));
        Trace t = run(task_of(p), policy, pool);
        not_answered += t.termination != Termination::Answered;
        wrong += score(t.final_answer.value_or(""), p.gold_answer, MetricKind::ExactMatch) != 1;
        c.traces.push_back(std::move(t));
    }
    std::ostringstream d;
    d << c.traces.size() << " runs, " << not_answered << " not Answered, " << wrong << " EM misses";
    return {!c.traces.empty() && not_answered == 0 && wrong == 0, d.str()};
}

// I_{k+1} is the tool's image when it returns one, otherwise the view the tool saw.
bool transition_holds(const ViewState& tool_view, const ToolOutput& out, const ViewState& next) {
    if (const auto* img = std::get_if<ImageOut>(&out)) return next == img->view;
    return next == tool_view;
}

Outcome state_machine() {
    const SceneSet scenes = generate_scenes({.count = 50, .seed = 2});
    const ToolPool pool(scenes, ToolBackendBinding::oracle());
    Rng rng(1234);
    std::size_t transitions = 0, violations = 0, image = 0, text = 0;
    while (transitions < 10000) {
        const Scene& s = scenes.scenes()[rng.index(scenes.size())];
        // random starting view: maybe zoomed, maybe marked
        ViewState v = full_view(s);
        if (rng.chance(0.3)) {
            const double w = rng.uniform(0.3, 1.0) * s.width, h = rng.uniform(0.3, 1.0) * s.height;
            const double x = rng.uniform(0, s.width - w), y = rng.uniform(0, s.height - h);
            v = crop_zoom(v, BBox(x, y, x + w, y + h));
        }
        if (rng.chance(0.5)) {
            const BBox& vp = v.viewport;
            const double x = rng.uniform(vp.x0(), vp.x1() - 1), y = rng.uniform(vp.y0(), vp.y1() - 1);
            v = add_mark(v, BBox(x, y, std::min(vp.x1(), x + rng.uniform(1, 200)), std::min(vp.y1(), y + rng.uniform(1, 200))));
        }
        const Entity& e = s.entities[rng.index(s.entities.size())];
        ToolInvocation inv;
        switch (rng.index(4)) {
            case 0: inv = ToolInvocation::grounding("the " + e.label); break;
            case 1: inv = ToolInvocation::highlight(text::plural(e.label)); break;
            case 2: inv = ToolInvocation::ocr(); break;
            default: inv = ToolInvocation::answer("How many " + text::plural(e.label) + " are there?"); break;
        }
        const ViewState tool_view = pool.preprocess(v, inv.kind);
        ToolOutput out;
        try {
            out = pool.execute(tool_view, inv);
        } catch (const Error&) {
            continue;  // no match in this view; not a transition
        }
        const ViewState next = advance_view(tool_view, out);
        ++transitions;
        (output_class(out) == OutputClass::Image ? image : text)++;
        if (!transition_holds(tool_view, out, next)) ++violations;
        // text never alters the view; an image replaces it wholesale
        if (output_class(out) == OutputClass::Text && !(next == tool_view)) ++violations;
    }
    // the same property over every recorded step of the round-trip traces
    std::size_t trace_steps = 0;
    for (const auto& t : corpus().traces) {
        for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) {
            ++trace_steps;
            if (!t.steps[k].output || !transition_holds(t.steps[k].view_before, *t.steps[k].output, t.steps[k + 1].input_view)) {
                ++violations;
            }
        }
    }
    std::ostringstream d;
    d << transitions << " random transitions (" << image << " image, " << text << " text) + " << trace_steps
      << " trace transitions, " << violations << " violations";
    return {transitions >= 10000 && image > 0 && text > 0 && violations == 0, d.str()};
}

Outcome crop_rule() {
    const Scene s = [] {
        Scene sc;
        sc.id = "crop";
        sc.width = 640;
        sc.height = 480;
        return sc;
    }();
    Rng rng(99);
    const double alphas[] = {0.05, 0.2, 0.5};
    std::size_t cases = 0, violations = 0, crops = 0;
    for (int i = 0; i < 10000; ++i) {
        const double alpha = alphas[rng.index(3)];
        const ToolKind kind = kAllTools[rng.index(4)];
        ViewState v = full_view(s);
        const bool has_mark = rng.index(10) != 0;
        double frac = 0;
        BBox rect;
        if (has_mark) {
            const double w = rng.uniform(1, 640), h = rng.uniform(1, 480);
            const double x = rng.uniform(0, 640 - w), y = rng.uniform(0, 480 - h);
            rect = BBox(x, y, x + w, y + h);
            if (rng.chance(0.3)) v = add_highlights(v, {BBox(0, 0, 10, 10)});
            v = add_mark(v, rect);
            frac = (w * h) / (640.0 * 480.0);
        }
        const bool should_crop = has_mark && is_inferring(kind) && frac < alpha;
        const ViewState out = preprocess_for_tool(v, kind, alpha, s);
        ++cases;
        crops += should_crop;
        const bool ok = should_crop ? out.viewport == rect : out == v;
        if (!ok) ++violations;
    }
    std::ostringstream d;
    d << cases << " cases (" << crops << " crops), " << violations << " violations";
    return {violations == 0 && crops > 0, d.str()};
}

Outcome chain_rules() {
    const SceneSet scenes = generate_scenes({.count = 600, .seed = 2024});
    std::size_t chains = 0, violations = 0;
    std::map<std::size_t, std::size_t> by_len;
    for (const auto& s : scenes.scenes()) {
        const auto nodes = build_nodes(s, recognize_entities(s, 0.5), 0.05);
        Rng rng(mix_seed(2024, s.id));
        for (int i = 0; i < 40 && chains < 10000; ++i) {
            const auto chain = sample_chain(nodes, rng, 4, 0.05 * s.diagonal());
            if (!chain) continue;
            ++chains;
            const auto& ns = chain->nodes;
            const auto& ts = chain->edge_tools;
            ++by_len[ns.size()];
            bool ok = ts.size() + 1 == ns.size() && ns.size() >= 2;
            // graphical tools on intermediary edges, textual on the terminal edge
            ok = ok && is_inferring(ts[0]);
            for (std::size_t k = 1; ok && k < ts.size(); ++k) ok = output_class(ts[k]) == OutputClass::Image;
            // OCR only where the head has text
            ok = ok && (ts[0] != ToolKind::OCR || !ns[0].profile.text.empty());
            // whole image last and only last
            ok = ok && ns.back().is_whole();
            for (std::size_t k = 0; ok && k + 1 < ns.size(); ++k) ok = !ns[k].is_whole();
            // length limit
            ok = ok && ns.size() <= 4;
            violations += !ok;
        }
        if (chains >= 10000) break;
    }
    std::ostringstream d;
    d << chains << " chains (M=2:" << by_len[2] << " M=3:" << by_len[3] << " M=4:" << by_len[4] << "), "
      << violations << " violations";
    return {chains >= 10000 && violations == 0, d.str()};
}

Outcome determinism() {
    const Corpus& c = corpus();
    const fs::path a = scratch("p1"), b = scratch("p8");
    write_dataset(a.string(), c.paths, c.scenes);
    GeneratorBinding g;
    g.rng_seed = 42;
    SynthesisOptions o;
    o.per_scene = 5;
    o.parallelism = 8;
    write_dataset(b.string(), synthesize_dataset(c.scenes, g, o), c.scenes);
    bool same = true;
    std::string digest;
    for (const char* f : {"dataset.steps.jsonl", "dataset.e2e.jsonl", "stats.json"}) {
        const std::string ha = sha256_file(a / f), hb = sha256_file(b / f);
        same = same && ha == hb;
        if (digest.empty()) digest = ha.substr(0, 16);
    }
    fs::remove_all(a);
    fs::remove_all(b);
    return {same, std::string("parallelism 1 vs 8, 3 files, steps sha256 ") + digest + "..." +
                      (same ? " identical" : " DIFFER")};
}

Outcome metric_semantics() {
    std::size_t violations = 0;
    auto expect = [&](bool b) { violations += !b; };
    expect(score("The answer is 2", "2", MetricKind::ExactMatch) == 0);
    expect(score("The answer is 2", "2", MetricKind::AnswerRecall) == 1);
    expect(score("2", "2", MetricKind::ExactMatch) == 1);
    expect(score("blue car", "red", MetricKind::AnswerRecall) == 0);
    expect(normalize("  BWI Airport. ") == "bwi airport");
    expect(normalize("The answer is 2") == "the answer is 2");
    const std::size_t unit_failures = violations;

    Rng rng(7);
    const std::vector<std::string> vocab{"2", "4", "red", "Red", "the", "answer", "is", "BWI", "airport", "stop",
                                         "  ", ".", "?", "!", ",", "a"};
    auto phrase = [&] {
        std::string s;
        const int n = static_cast<int>(rng.index(5));
        for (int i = 0; i < n; ++i) s += (rng.chance(0.8) ? " " : "") + vocab[rng.index(vocab.size())];
        return s;
    };
    std::size_t em_hits = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::string gold = phrase();
        std::string pred = rng.chance(0.3) ? gold : phrase();
        if (rng.chance(0.2)) pred = " " + pred + ". ";
        const int em = score(pred, gold, MetricKind::ExactMatch);
        em_hits += em;
        if (em && !score(pred, gold, MetricKind::AnswerRecall)) ++violations;
    }
    std::ostringstream d;
    d << unit_failures << " unit failures, " << (violations - unit_failures) << " EM=>Recall violations over 10000 pairs ("
      << em_hits << " EM hits)";
    return {violations == 0 && em_hits > 0, d.str()};
}

// Another label present in the scene, as a replacement target that changes
// what the oracle returns.
std::optional<ToolInvocation> corrupt_argument(const ToolInvocation& inv, const Scene& scene, const ViewState& view,
                                               const ToolPool& pool) {
    std::optional<ToolOutput> want;
    try {
        want = pool.invoke(view, inv);
    } catch (const Error&) {
        return std::nullopt;
    }
    std::set<std::string> labels;
    for (const auto& e : scene.entities) labels.insert(e.label);
    for (const auto& l : labels) {
        ToolInvocation bad = inv;
        bad.target_entity = inv.kind == ToolKind::Highlight ? text::plural(l) : "the " + l;
        if (bad == inv) continue;
        try {
            if (pool.invoke(view, bad) != *want) return bad;
        } catch (const Error&) {
            return bad;  // failing to execute is also a different result
        }
    }
    return std::nullopt;
}

ToolInvocation swap_tool(const PathStep& s) {
    switch (s.invocation.kind) {
        case ToolKind::Grounding: return ToolInvocation::highlight(s.invocation.target_entity);
        case ToolKind::Highlight: return ToolInvocation::grounding(s.invocation.target_entity);
        case ToolKind::OCR: return ToolInvocation::answer(s.sub_question);
        case ToolKind::Answer: return ToolInvocation::ocr();
    }
    return ToolInvocation::ocr();
}

ToolOutput corrupt_output(const ToolOutput& out, const Scene& scene) {
    if (const auto* img = std::get_if<ImageOut>(&out)) {
        ViewState v = img->view;
        Annotation& a = v.annotations.back();
        // shift the newest annotation so it covers a different region
        const BBox& r = a.rect;
        const double dx = r.x1() + 10 <= v.viewport.x1() ? 10 : -10;
        a.rect = BBox(std::clamp(r.x0() + dx, 0.0, double(scene.width)), r.y0(),
                      std::clamp(r.x1() + dx, 0.0, double(scene.width)), r.y1());
        if (a.rect == r) v.annotations.push_back(Annotation{AnnotationKind::Mark, v.viewport, {}});
        return ImageOut{v};
    }
    TextOut t = std::get<TextOut>(out);
    if (t.items.empty()) t.items.push_back("SPURIOUS");
    else t.items.front() += "X";
    return t;
}

Outcome error_taxonomy() {
    const auto t0 = Clock::now();
    const Corpus& c = corpus();
    const ToolPool pool(c.scenes, ToolBackendBinding::oracle());
    std::size_t built[3] = {0, 0, 0}, correct[3] = {0, 0, 0};
    std::map<std::string, std::size_t> misses;
    auto record = [&](int kind, ErrorLabel got, ErrorLabel want) {
        ++built[kind];
        if (got == want) ++correct[kind];
        else ++misses[std::string(to_string(want)) + "->" + to_string(got)];
    };

    for (std::size_t i = 0; i < c.paths.size(); ++i) {
        const ReasoningPath& p = c.paths[i];
        const Scene& scene = c.scenes.at(p.scene_id);
        const std::size_t k = i % p.steps.size();

        if (built[0] < 100) {  // tool swap at step k
            auto script = script_of(p);
            script[k].invocation = swap_tool(p.steps[k]);
            ScriptedPolicy policy(script);
            record(0, classify_error(run(task_of(p), policy, pool), p, pool), ErrorLabel::Reasoning_Tool);
        }

        if (built[1] < 100) {  // argument corruption on the first graphical step
            for (std::size_t j = 0; j < p.steps.size(); ++j) {
                if (output_class(p.steps[j].invocation.kind) != OutputClass::Image) continue;
                const ViewState gold_view = c.traces[i].steps[j].input_view;
                const auto bad = corrupt_argument(p.steps[j].invocation, scene, gold_view, pool);
                if (!bad) break;
                auto script = script_of(p);
                script[j].invocation = *bad;
                ScriptedPolicy policy(script);
                record(1, classify_error(run(task_of(p), policy, pool), p, pool), ErrorLabel::Reasoning_Arguments);
                break;
            }
        }

        if (built[2] < 100) {  // backend returned a wrong result at a non-Answer step
            Trace t = c.traces[i];
            for (auto& step : t.steps) {
                if (step.invocation.kind == ToolKind::Answer || !step.output) continue;
                step.output = corrupt_output(*step.output, scene);
                ErrorLabel want = step.invocation.kind == ToolKind::Grounding   ? ErrorLabel::Execution_Grounding
                                  : step.invocation.kind == ToolKind::Highlight ? ErrorLabel::Execution_Highlight
                                                                                : ErrorLabel::Execution_OCR;
                record(2, classify_error(t, p, pool), want);
                break;
            }
        }
        if (built[0] >= 100 && built[1] >= 100 && built[2] >= 100) break;
    }
    const std::size_t total = built[0] + built[1] + built[2];
    const std::size_t hits = correct[0] + correct[1] + correct[2];
    const double secs = seconds_since(t0);
    const double acc = total ? double(hits) / double(total) : 0.0;
    std::ostringstream d;
    d << hits << "/" << total << " exact (tool " << correct[0] << "/" << built[0] << ", args " << correct[1] << "/"
      << built[1] << ", exec " << correct[2] << "/" << built[2] << "), " << secs << " s";
    for (const auto& [k, v] : misses) d << "; " << k << " x" << v;
    return {total == 300 && acc >= 0.99 && secs < 30.0, d.str()};
}

Outcome entity_filter() {
    // every generated scene gets injected copies of its entities at 0.50 and 0.51
    const SceneSet base = generate_scenes({.count = 100, .seed = 77});
    std::vector<Scene> targeted;
    for (Scene s : base.scenes()) {
        std::vector<Entity> extra;
        for (const auto& e : s.entities) {
            for (const char* tag : {"c50", "c51"}) {
                Entity x = e;
                x.id = std::string(tag) + "_" + e.id;
                x.confidence = std::string(tag) == "c50" ? 0.50 : 0.51;
                extra.push_back(std::move(x));
            }
        }
        s.entities.insert(s.entities.end(), extra.begin(), extra.end());
        targeted.push_back(std::move(s));
    }
    const SceneSet scenes(targeted);
    std::size_t leaks = 0, admitted51 = 0, nodes_checked = 0;
    auto check_id = [&](const std::string& id) {
        leaks += text::starts_with(id, "c50_");
        admitted51 += text::starts_with(id, "c51_");
    };
    for (const auto& s : scenes.scenes()) {
        const auto entities = recognize_entities(s, 0.5);
        for (const auto& e : entities) leaks += e.confidence <= 0.5;
        for (const auto& n : build_nodes(s, entities, 0.05)) {
            ++nodes_checked;
            if (n.is_single()) check_id(n.id);
            for (const auto& m : n.profile.member_ids) check_id(m);
        }
    }
    SynthesisOptions o;
    o.per_scene = 5;
    std::size_t path_refs = 0;
    for (const auto& p : synthesize_dataset(scenes, GeneratorBinding{}, o)) {
        for (const auto& id : p.chain.nodes) {
            ++path_refs;
            leaks += id.find("c50_") != std::string::npos;
        }
    }
    std::ostringstream d;
    d << nodes_checked << " nodes and " << path_refs << " chain references checked, " << leaks
      << " leaks of 0.50 entities, " << admitted51 << " node references to 0.51 entities";
    return {leaks == 0 && admitted51 > 0, d.str()};
}

Outcome serialization() {
    Corpus& c = corpus();
    if (c.traces.empty()) round_trip();
    std::vector<std::string> broken;

    const std::string steps = serialize_step_records(c.paths);
    if (serialize_step_records(paths_from_step_records(parse_step_records(steps))) != steps) broken.push_back("steps");

    const std::string e2e = serialize_e2e(c.paths, c.scenes);
    std::vector<ReasoningPath> rebuilt;
    for (const auto& r : parse_e2e(e2e)) rebuilt.push_back(path_from_e2e(r, c.scenes.at(r.scene_id)));
    if (serialize_e2e(rebuilt, c.scenes) != e2e) broken.push_back("e2e");
    std::string e2e_lines;
    for (const auto& r : parse_e2e(e2e)) e2e_lines += e2e_record_to_json(r).dump() + "\n";
    if (e2e_lines != e2e) broken.push_back("e2e-records");

    const std::string traces = serialize_traces(c.traces);
    if (serialize_traces(parse_traces(traces)) != traces) broken.push_back("traces");

    const std::string scenes = serialize_scenes(c.scenes);
    if (serialize_scenes(parse_scenes(scenes)) != scenes) broken.push_back("scenes");

    const fs::path dir = scratch("files");
    write_dataset(dir.string(), c.paths, c.scenes);
    if (load_paths((dir / "dataset.steps.jsonl").string()) != c.paths) broken.push_back("steps-file");
    fs::remove_all(dir);

    std::ostringstream d;
    d << c.paths.size() << " paths, " << c.traces.size() << " traces, " << c.scenes.size() << " scenes";
    if (broken.empty()) d << ", all byte-identical";
    else d << ", broken: " << text::join(broken, ",");
    return {broken.empty(), d.str()};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"C1  synthesis quality (1000 paths, 3 checks, <60 s)", synthesis_quality},
        {"C2  round-trip soundness (scripted + oracle)", round_trip},
        {"C3  view state-machine property", state_machine},
        {"C4  crop-and-enlarge rule property", crop_rule},
        {"C5  chain-rule conformance", chain_rules},
        {"C6  determinism across parallelism", determinism},
        {"C7  metric semantics", metric_semantics},
        {"C8  error-taxonomy classifier", error_taxonomy},
        {"C9  confidence filter boundary", entity_filter},
        {"C10 serialization round trips", serialization},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures ? 1 : 0;
}
