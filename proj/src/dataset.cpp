#include "reasonforge/dataset.hpp"

#include <filesystem>
#include <map>
#include <sstream>

#include "reasonforge/error.hpp"
#include "reasonforge/text.hpp"

namespace reasonforge {

namespace fs = std::filesystem;

std::string to_jsonl(const std::vector<Json>& lines) {
    std::string out;
    for (const auto& j : lines) {
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Json> parse_jsonl(std::string_view text, std::string_view what) {
    std::vector<Json> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (const Json::parse_error& e) {
            throw Error::parse(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {

void expect_kind(const Json& j, const char* kind) {
    if (!j.is_object() || j.value("format", "") != "v1" || j.value("kind", "") != kind) {
        throw Error::parse(std::string("expected a v1 '") + kind + "' record");
    }
}

}  // namespace

// ---------------------------------------------------------------- step records

std::vector<StepRecord> emit_step_records(const ReasoningPath& path) {
    std::vector<StepRecord> out;
    std::vector<std::string> prior;
    const int n = static_cast<int>(path.steps.size());
    for (int k = 0; k < n; ++k) {
        const PathStep& s = path.steps[k];
        StepRecord r;
        r.path_id = path.id;
        r.scene_id = path.scene_id;
        r.step_index = k + 1;
        r.num_steps = n;
        r.view = s.view;
        r.main_question = path.main_question;
        r.prior_sub_questions = prior;
        r.label_sub_question = s.sub_question;
        r.label_invocation = s.invocation;
        r.gold_answer = path.gold_answer;
        r.chain = path.chain;
        out.push_back(std::move(r));
        prior.push_back(s.sub_question);
    }
    return out;
}

Json step_record_to_json(const StepRecord& r) {
    Json j;
    j["format"] = "v1";
    j["kind"] = "step";
    j["path_id"] = r.path_id;
    j["scene_id"] = r.scene_id;
    j["step_index"] = r.step_index;
    j["num_steps"] = r.num_steps;
    j["view"] = view_to_json(r.view);
    j["image_path"] = r.image_path ? Json(*r.image_path) : Json(nullptr);
    j["main_question"] = r.main_question;
    j["prior_sub_questions"] = r.prior_sub_questions;
    j["label_sub_question"] = r.label_sub_question;
    j["label_invocation"] = invocation_to_json(r.label_invocation);
    j["gold_answer"] = r.gold_answer;
    j["chain"] = chain_spec_to_json(r.chain);
    return j;
}

StepRecord step_record_from_json(const Json& j) {
    expect_kind(j, "step");
    try {
        StepRecord r;
        r.path_id = j.at("path_id").get<std::string>();
        r.scene_id = j.at("scene_id").get<std::string>();
        r.step_index = j.at("step_index").get<int>();
        r.num_steps = j.at("num_steps").get<int>();
        r.view = view_from_json(j.at("view"));
        if (!j.at("image_path").is_null()) r.image_path = j.at("image_path").get<std::string>();
        r.main_question = j.at("main_question").get<std::string>();
        r.prior_sub_questions = j.at("prior_sub_questions").get<std::vector<std::string>>();
        r.label_sub_question = j.at("label_sub_question").get<std::string>();
        r.label_invocation = invocation_from_json(j.at("label_invocation"));
        r.gold_answer = j.at("gold_answer").get<std::string>();
        r.chain = chain_spec_from_json(j.at("chain"));
        return r;
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("step record: ") + e.what());
    }
}

std::vector<ReasoningPath> paths_from_step_records(const std::vector<StepRecord>& records) {
    std::vector<ReasoningPath> out;
    for (std::size_t i = 0; i < records.size();) {
        const StepRecord& first = records[i];
        if (first.step_index != 1 || first.num_steps < 1) {
            throw Error::parse("path " + first.path_id + " does not start at step 1");
        }
        ReasoningPath p;
        p.id = first.path_id;
        p.scene_id = first.scene_id;
        p.main_question = first.main_question;
        p.gold_answer = first.gold_answer;
        p.chain = first.chain;
        std::vector<std::string> prior;
        for (int k = 1; k <= first.num_steps; ++k, ++i) {
            if (i >= records.size()) throw Error::parse("path " + p.id + " is truncated");
            const StepRecord& r = records[i];
            if (r.path_id != p.id || r.step_index != k || r.num_steps != first.num_steps ||
                r.main_question != p.main_question || r.gold_answer != p.gold_answer || r.chain != p.chain ||
                r.scene_id != p.scene_id) {
                throw Error::parse("path " + p.id + " step " + std::to_string(k) + " is inconsistent");
            }
            if (r.prior_sub_questions != prior) {
                throw Error::parse("path " + p.id + " step " + std::to_string(k) + " has wrong prior sub-questions");
            }
            p.steps.push_back({r.view, r.label_sub_question, r.label_invocation});
            prior.push_back(r.label_sub_question);
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------- end-to-end

namespace {

// Oracle replay of a path's invocations from the full view.
template <typename Visit>
void replay_path(const ReasoningPath& path, const Scene& scene, double alpha, Visit&& visit) {
    OracleBackend oracle;
    ViewState view = full_view(scene);
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
        const PathStep& s = path.steps[k];
        try {
            const ViewState tool_view = preprocess_for_tool(view, s.invocation.kind, alpha, scene);
            const ToolOutput out = oracle.execute(scene, tool_view, s.invocation);
            visit(k, view, out);
            view = advance_view(tool_view, out);
        } catch (const Error& e) {
            throw Error::execution("path " + path.id + " step " + std::to_string(k + 1) + ": " + e.what());
        }
    }
}

}  // namespace

EndToEndRecord emit_end_to_end(const ReasoningPath& path, const Scene& scene, double alpha) {
    EndToEndRecord r;
    r.path_id = path.id;
    r.scene_id = path.scene_id;
    r.main_question = path.main_question;
    r.final_answer = path.gold_answer;
    r.chain = path.chain;
    replay_path(path, scene, alpha, [&](std::size_t k, const ViewState&, const ToolOutput& out) {
        r.transcript.push_back({path.steps[k].sub_question, path.steps[k].invocation, summarize(out)});
    });
    return r;
}

Json e2e_record_to_json(const EndToEndRecord& r) {
    Json j;
    j["format"] = "v1";
    j["kind"] = "e2e";
    j["path_id"] = r.path_id;
    j["scene_id"] = r.scene_id;
    j["main_question"] = r.main_question;
    Json t = Json::array();
    for (const auto& e : r.transcript) {
        t.push_back(Json{{"sub_question", e.sub_question},
                         {"invocation", invocation_to_json(e.invocation)},
                         {"output", e.output}});
    }
    j["transcript"] = std::move(t);
    j["final_answer"] = r.final_answer;
    j["chain"] = chain_spec_to_json(r.chain);
    return j;
}

EndToEndRecord e2e_record_from_json(const Json& j) {
    expect_kind(j, "e2e");
    try {
        EndToEndRecord r;
        r.path_id = j.at("path_id").get<std::string>();
        r.scene_id = j.at("scene_id").get<std::string>();
        r.main_question = j.at("main_question").get<std::string>();
        for (const auto& e : j.at("transcript")) {
            r.transcript.push_back({e.at("sub_question").get<std::string>(), invocation_from_json(e.at("invocation")),
                                    e.at("output").get<std::string>()});
        }
        r.final_answer = j.at("final_answer").get<std::string>();
        r.chain = chain_spec_from_json(j.at("chain"));
        return r;
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("e2e record: ") + e.what());
    }
}

ReasoningPath path_from_e2e(const EndToEndRecord& r, const Scene& scene, double alpha) {
    ReasoningPath p;
    p.id = r.path_id;
    p.scene_id = r.scene_id;
    p.main_question = r.main_question;
    p.gold_answer = r.final_answer;
    p.chain = r.chain;
    for (const auto& e : r.transcript) p.steps.push_back({ViewState{}, e.sub_question, e.invocation});
    replay_path(p, scene, alpha, [&](std::size_t k, const ViewState& view, const ToolOutput&) { p.steps[k].view = view; });
    return p;
}

std::string serialize_step_records(const std::vector<ReasoningPath>& paths) {
    std::string out;
    for (const auto& p : paths) {
        for (const auto& r : emit_step_records(p)) {
            out += step_record_to_json(r).dump();
            out += '\n';
        }
    }
    return out;
}

std::vector<StepRecord> parse_step_records(std::string_view text) {
    std::vector<StepRecord> out;
    for (const auto& j : parse_jsonl(text, "steps")) out.push_back(step_record_from_json(j));
    return out;
}

std::string serialize_e2e(const std::vector<ReasoningPath>& paths, const SceneSet& scenes, double alpha) {
    std::string out;
    for (const auto& p : paths) {
        out += e2e_record_to_json(emit_end_to_end(p, scenes.at(p.scene_id), alpha)).dump();
        out += '\n';
    }
    return out;
}

std::vector<EndToEndRecord> parse_e2e(std::string_view text) {
    std::vector<EndToEndRecord> out;
    for (const auto& j : parse_jsonl(text, "e2e")) out.push_back(e2e_record_from_json(j));
    return out;
}

std::vector<ReasoningPath> load_paths(const std::string& file, const SceneSet* scenes, double alpha) {
    const std::string text = read_file(file);
    const auto lines = parse_jsonl(text, file);
    if (lines.empty()) return {};
    const std::string kind = lines.front().value("kind", "");
    if (kind == "step") {
        std::vector<StepRecord> records;
        for (const auto& j : lines) records.push_back(step_record_from_json(j));
        return paths_from_step_records(records);
    }
    if (kind == "e2e") {
        if (!scenes) throw Error::config(file + ": end-to-end records need --scenes to rebuild views");
        std::vector<ReasoningPath> out;
        for (const auto& j : lines) {
            const auto r = e2e_record_from_json(j);
            out.push_back(path_from_e2e(r, scenes->at(r.scene_id), alpha));
        }
        return out;
    }
    throw Error::parse(file + ": not a dataset file (kind '" + kind + "')");
}

// ---------------------------------------------------------------- stats

Json corpus_stats(const std::vector<ReasoningPath>& paths, const SceneSet* scenes) {
    std::map<std::size_t, std::size_t> by_steps;
    std::map<std::string, std::size_t> tools{{"grounding", 0}, {"highlight", 0}, {"ocr", 0}, {"answer", 0}};
    std::map<std::string, std::size_t> node_kinds{{"single_entity", 0}, {"entity_group", 0}, {"whole_image", 0}};
    std::map<std::string, std::size_t> per_scene;
    if (scenes) {
        for (const auto& s : scenes->scenes()) per_scene[s.id] = 0;
    }
    std::size_t total_steps = 0;
    for (const auto& p : paths) {
        ++by_steps[p.steps.size()];
        total_steps += p.steps.size();
        for (const auto& s : p.steps) ++tools[to_string(s.invocation.kind)];
        for (const auto& n : p.chain.nodes) {
            ++node_kinds[n == "whole" ? "whole_image" : text::starts_with(n, "g:") ? "entity_group" : "single_entity"];
        }
        ++per_scene[p.scene_id];
    }
    Json j;
    j["format"] = "v1";
    j["kind"] = "stats";
    j["paths"] = paths.size();
    j["steps"] = total_steps;
    Json bs = Json::object();
    for (const auto& [k, v] : by_steps) bs[std::to_string(k)] = v;
    j["by_step_count"] = std::move(bs);
    j["tools"] = tools;
    j["node_kinds"] = node_kinds;
    j["per_scene"] = per_scene;
    return j;
}

void write_dataset(const std::string& dir, const std::vector<ReasoningPath>& paths, const SceneSet& scenes,
                   const DatasetWriteOptions& options) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error::io("cannot create " + dir + ": " + ec.message());
    std::string steps;
    for (const auto& p : paths) {
        auto records = emit_step_records(p);
        for (auto& r : records) {
            if (options.render_images) {
                fs::create_directories(fs::path(dir) / "images");
                std::string name = r.path_id + "_" + std::to_string(r.step_index) + ".png";
                for (char& c : name) {
                    if (c == '#' || c == '/') c = '_';
                }
                const Scene& scene = scenes.at(r.scene_id);
                write_file((fs::path(dir) / "images" / name).string(),
                           encode_png(render(scene, r.view, scene.width, scene.height)));
                r.image_path = "images/" + name;
            }
            steps += step_record_to_json(r).dump();
            steps += '\n';
        }
    }
    write_file((fs::path(dir) / "dataset.steps.jsonl").string(), steps);
    write_file((fs::path(dir) / "dataset.e2e.jsonl").string(), serialize_e2e(paths, scenes, options.alpha));
    write_file((fs::path(dir) / "stats.json").string(), corpus_stats(paths, &scenes).dump(2) + "\n");
}

}  // namespace reasonforge
