#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "reasonforge/dataset.hpp"
#include "reasonforge/error.hpp"

using namespace reasonforge;
namespace fs = std::filesystem;

namespace {

struct Corpus {
    SceneSet scenes;
    std::vector<ReasoningPath> paths;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus out;
        out.scenes = generate_scenes({.count = 20, .seed = 42});
        out.paths = synthesize_dataset(out.scenes, GeneratorBinding{}, SynthesisOptions{});
        return out;
    }();
    return c;
}

const ReasoningPath& path_with_steps(std::size_t n) {
    for (const auto& p : corpus().paths) {
        if (p.steps.size() == n) return p;
    }
    FAIL("no path with the requested step count");
    return corpus().paths.front();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("reasonforge_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("step records carry the prefix of prior sub-questions") {
    const ReasoningPath& p = path_with_steps(3);
    const auto records = emit_step_records(p);
    REQUIRE(records.size() == 3);
    CHECK(records[0].prior_sub_questions.empty());
    CHECK(records[2].prior_sub_questions ==
          std::vector<std::string>{p.steps[0].sub_question, p.steps[1].sub_question});
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(records[k].step_index == static_cast<int>(k + 1));
        CHECK(records[k].num_steps == 3);
        CHECK(records[k].view == p.steps[k].view);
        CHECK(records[k].label_invocation == p.steps[k].invocation);
    }
}

TEST_CASE("step records round trip byte-identically") {
    const std::string text = serialize_step_records(corpus().paths);
    const auto records = parse_step_records(text);
    const auto paths = paths_from_step_records(records);
    CHECK(paths == corpus().paths);
    CHECK(serialize_step_records(paths) == text);
}

TEST_CASE("end-to-end records") {
    const ReasoningPath& p = path_with_steps(3);
    const Scene& s = corpus().scenes.at(p.scene_id);
    const EndToEndRecord r = emit_end_to_end(p, s);
    CHECK(r.transcript.size() == 3);
    CHECK(r.final_answer == p.gold_answer);
    CHECK(e2e_record_from_json(e2e_record_to_json(r)) == r);
    CHECK(path_from_e2e(r, s) == p);

    const std::string text = serialize_e2e(corpus().paths, corpus().scenes);
    const auto parsed = parse_e2e(text);
    CHECK(parsed.size() == corpus().paths.size());
    std::vector<ReasoningPath> rebuilt;
    for (const auto& rec : parsed) rebuilt.push_back(path_from_e2e(rec, corpus().scenes.at(rec.scene_id)));
    CHECK(serialize_e2e(rebuilt, corpus().scenes) == text);
}

TEST_CASE("emission fails naming the step when replay breaks") {
    ReasoningPath p = path_with_steps(2);
    p.steps[0].invocation = ToolInvocation::grounding("the zebra");
    try {
        emit_end_to_end(p, corpus().scenes.at(p.scene_id));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("malformed step files are rejected") {
    CHECK_THROWS_AS(parse_step_records("{not json}\n"), Error);
    CHECK_THROWS_AS(parse_step_records("{\"format\":\"v2\",\"kind\":\"step\"}\n"), Error);
    auto records = emit_step_records(path_with_steps(3));
    records.erase(records.begin() + 1);
    CHECK_THROWS_AS(paths_from_step_records(records), Error);
}

TEST_CASE("corpus stats") {
    const Json empty = corpus_stats({});
    CHECK(empty.at("paths") == 0);
    CHECK(empty.at("steps") == 0);

    std::vector<ReasoningPath> ten(10, path_with_steps(3));
    const Json st = corpus_stats(ten);
    CHECK(st.at("by_step_count") == Json{{"3", 10}});
    CHECK(st.at("kind") == "stats");

    const Json full = corpus_stats(corpus().paths, &corpus().scenes);
    CHECK(full.at("per_scene").size() == corpus().scenes.size());
}

TEST_CASE("write_dataset and load_paths") {
    const fs::path dir = scratch_dir("dataset_test");
    write_dataset(dir.string(), corpus().paths, corpus().scenes, DatasetWriteOptions{0.2, true});
    CHECK(fs::exists(dir / "dataset.steps.jsonl"));
    CHECK(fs::exists(dir / "dataset.e2e.jsonl"));
    CHECK(fs::exists(dir / "stats.json"));
    std::size_t steps = 0;
    for (const auto& p : corpus().paths) steps += p.steps.size();
    std::size_t pngs = 0;
    for (const auto& f : fs::directory_iterator(dir / "images")) pngs += f.path().extension() == ".png";
    CHECK(pngs == steps);

    CHECK(load_paths((dir / "dataset.steps.jsonl").string()) == corpus().paths);
    CHECK(load_paths((dir / "dataset.e2e.jsonl").string(), &corpus().scenes) == corpus().paths);
    CHECK_THROWS_AS(load_paths((dir / "dataset.e2e.jsonl").string()), Error);
    fs::remove_all(dir);
}

TEST_CASE("jsonl helpers") {
    const std::vector<Json> lines{Json{{"a", 1}}, Json{{"b", "x"}}};
    CHECK(to_jsonl(lines) == "{\"a\":1}\n{\"b\":\"x\"}\n");
    CHECK(parse_jsonl(to_jsonl(lines), "test") == lines);
    CHECK(parse_jsonl("\n\n", "test").empty());
}
