#pragma once

// Training-record formats. Every line of every file carries "format":"v1" and
// a "kind" tag:
//   dataset.steps.jsonl  kind "step"  one record per reasoning step
//   dataset.e2e.jsonl    kind "e2e"   one record per path (whole transcript)
//   traces.jsonl         kind "trace" see reasoner.hpp
//   stats.json           kind "stats"

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reasonforge/synthesis.hpp"

namespace reasonforge {

struct StepRecord {
    std::string path_id;
    std::string scene_id;
    int step_index = 1;  // k, 1-based
    int num_steps = 1;
    ViewState view;  // I_k
    std::optional<std::string> image_path;
    std::string main_question;
    std::vector<std::string> prior_sub_questions;
    std::string label_sub_question;
    ToolInvocation label_invocation;
    std::string gold_answer;
    ChainSpec chain;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

std::vector<StepRecord> emit_step_records(const ReasoningPath& path);
Json step_record_to_json(const StepRecord& r);
StepRecord step_record_from_json(const Json& j);
/// Inverse of emit_step_records over a whole file's records (grouped by
/// path, in order). Throws Error(Parse) on gaps or inconsistent prefixes.
std::vector<ReasoningPath> paths_from_step_records(const std::vector<StepRecord>& records);

struct TranscriptEntry {
    std::string sub_question;
    ToolInvocation invocation;
    std::string output;  // summarize() of the tool output

    friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct EndToEndRecord {
    std::string path_id;
    std::string scene_id;
    std::string main_question;
    std::vector<TranscriptEntry> transcript;
    std::string final_answer;
    ChainSpec chain;

    friend bool operator==(const EndToEndRecord&, const EndToEndRecord&) = default;
};

/// Replays the path on oracle tools to record each step's output. Throws
/// Error(Execution) naming the failing step.
EndToEndRecord emit_end_to_end(const ReasoningPath& path, const Scene& scene, double alpha = 0.2);
Json e2e_record_to_json(const EndToEndRecord& r);
EndToEndRecord e2e_record_from_json(const Json& j);
/// Views are reconstructed by oracle replay.
ReasoningPath path_from_e2e(const EndToEndRecord& r, const Scene& scene, double alpha = 0.2);

std::string serialize_step_records(const std::vector<ReasoningPath>& paths);
std::vector<StepRecord> parse_step_records(std::string_view text);
std::string serialize_e2e(const std::vector<ReasoningPath>& paths, const SceneSet& scenes, double alpha = 0.2);
std::vector<EndToEndRecord> parse_e2e(std::string_view text);

/// Reads either a steps or an e2e file. E2E input needs the scenes.
std::vector<ReasoningPath> load_paths(const std::string& file, const SceneSet* scenes = nullptr, double alpha = 0.2);

/// Step-count histogram, tool histogram over executed steps, node-kind
/// histogram and per-scene yield (scenes without paths included when given).
Json corpus_stats(const std::vector<ReasoningPath>& paths, const SceneSet* scenes = nullptr);

struct DatasetWriteOptions {
    double alpha = 0.2;
    /// Also write images/<path>_<k>.png for every step view.
    bool render_images = false;
};

/// Writes dataset.steps.jsonl, dataset.e2e.jsonl and stats.json into `dir`.
void write_dataset(const std::string& dir, const std::vector<ReasoningPath>& paths, const SceneSet& scenes,
                   const DatasetWriteOptions& options = {});

/// Dumps one JSON document per line.
std::string to_jsonl(const std::vector<Json>& lines);
std::vector<Json> parse_jsonl(std::string_view text, std::string_view what);

}  // namespace reasonforge
