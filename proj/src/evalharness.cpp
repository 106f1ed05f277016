#include "reasonforge/evalharness.hpp"

#include <atomic>
#include <cstdio>
#include <set>
#include <thread>

#include "reasonforge/error.hpp"
#include "reasonforge/text.hpp"

namespace reasonforge {

const char* to_string(MetricKind m) { return m == MetricKind::ExactMatch ? "em" : "recall"; }

MetricKind metric_from_string(std::string_view s) {
    const std::string l = text::lower(s);
    if (l == "em") return MetricKind::ExactMatch;
    if (l == "recall") return MetricKind::AnswerRecall;
    throw Error::config("unknown metric '" + std::string(s) + "' (expected em or recall)");
}

std::string normalize(std::string_view answer) {
    std::string out;
    bool pending_space = false;
    for (char c : answer) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(u));
    }
    while (!out.empty() && (out.back() == '.' || out.back() == ',' || out.back() == '!' || out.back() == '?' ||
                            out.back() == ' ')) {
        out.pop_back();
    }
    return out;
}

int score(std::string_view pred, std::string_view gold, MetricKind metric) {
    const std::string p = normalize(pred), g = normalize(gold);
    if (metric == MetricKind::ExactMatch) return p == g ? 1 : 0;
    return p.find(g) != std::string::npos ? 1 : 0;
}

const char* to_string(ErrorLabel l) {
    switch (l) {
        case ErrorLabel::Reasoning_Tool: return "Reasoning_Tool";
        case ErrorLabel::Reasoning_Arguments: return "Reasoning_Arguments";
        case ErrorLabel::Execution_Grounding: return "Execution_Grounding";
        case ErrorLabel::Execution_OCR: return "Execution_OCR";
        case ErrorLabel::Execution_Highlight: return "Execution_Highlight";
        case ErrorLabel::Inference_Wrong: return "Inference_Wrong";
        case ErrorLabel::Inference_Missing: return "Inference_Missing";
        case ErrorLabel::Correct: return "Correct";
    }
    return "unknown";
}

namespace {

ErrorLabel execution_label(ToolKind k) {
    switch (k) {
        case ToolKind::Grounding: return ErrorLabel::Execution_Grounding;
        case ToolKind::Highlight: return ErrorLabel::Execution_Highlight;
        default: return ErrorLabel::Execution_OCR;
    }
}

std::optional<ToolOutput> try_execute(const ToolPool& tools, const ViewState& view, const ToolInvocation& inv) {
    try {
        return tools.invoke(view, inv);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

ErrorLabel judge_answer(const std::optional<std::string>& final_answer, const std::string& gold) {
    const std::string pred = final_answer.value_or("");
    if (score(pred, gold, MetricKind::ExactMatch)) return ErrorLabel::Correct;
    const auto pt = text::tokens(normalize(pred));
    const auto gt = text::tokens(normalize(gold));
    const std::set<std::string> gs(gt.begin(), gt.end());
    for (const auto& t : pt) {
        if (gs.count(t)) return ErrorLabel::Inference_Wrong;
    }
    return ErrorLabel::Inference_Missing;
}

}  // namespace

ErrorLabel classify_error(const Trace& pred, const ReasoningPath& gold, const ToolPool& tools) {
    if (pred.steps.empty()) return ErrorLabel::Inference_Missing;
    const Scene& scene = tools.scenes().at(gold.scene_id);
    ViewState gold_view = full_view(scene);
    for (std::size_t k = 0; k < gold.steps.size(); ++k) {
        const ToolInvocation& gi = gold.steps[k].invocation;
        if (k >= pred.steps.size()) return ErrorLabel::Reasoning_Tool;
        const Step& ps = pred.steps[k];
        if (ps.invocation.kind != gi.kind) return ErrorLabel::Reasoning_Tool;

        const auto gold_out = try_execute(tools, gold_view, gi);
        const auto pred_out = try_execute(tools, gold_view, ps.invocation);
        if (!gold_out) return ErrorLabel::Inference_Missing;  // gold itself no longer executes
        if (!pred_out || *pred_out != *gold_out) return ErrorLabel::Reasoning_Arguments;
        if (gi.kind != ToolKind::Answer && (!ps.output || *ps.output != *pred_out)) {
            return execution_label(gi.kind);
        }
        gold_view = advance_view(tools.preprocess(gold_view, gi.kind), *gold_out);
    }
    return judge_answer(pred.final_answer, gold.gold_answer);
}

EvalReport evaluate_corpus(const std::vector<Trace>& traces, const std::vector<ReasoningPath>& gold,
                           const ToolPool& tools, MetricKind metric, int parallelism) {
    std::map<std::string, const ReasoningPath*> by_id;
    for (const auto& p : gold) by_id[p.id] = &p;
    std::set<std::string> trace_ids;
    std::vector<std::string> unmatched;
    for (const auto& t : traces) {
        trace_ids.insert(t.task.id);
        if (!by_id.count(t.task.id)) unmatched.push_back("trace:" + t.task.id);
    }
    for (const auto& p : gold) {
        if (!trace_ids.count(p.id)) unmatched.push_back("gold:" + p.id);
    }
    if (!unmatched.empty()) {
        std::string list;
        for (std::size_t i = 0; i < unmatched.size() && i < 20; ++i) list += (i ? ", " : "") + unmatched[i];
        if (unmatched.size() > 20) list += ", ...";
        throw Error::precondition(std::to_string(unmatched.size()) + " unmatched ids: " + list);
    }

    std::vector<ErrorLabel> labels(traces.size(), ErrorLabel::Correct);
    std::vector<int> scores(traces.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < traces.size(); i = next++) {
            const ReasoningPath& g = *by_id.at(traces[i].task.id);
            labels[i] = classify_error(traces[i], g, tools);
            scores[i] = score(traces[i].final_answer.value_or(""), g.gold_answer, metric);
        }
    };
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(traces.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    EvalReport r;
    r.metric = metric;
    r.n = traces.size();
    std::map<int, std::pair<std::size_t, std::size_t>> steps;  // hits, total
    std::size_t hits = 0, errors = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        hits += scores[i];
        ++r.label_counts[to_string(labels[i])];
        if (labels[i] != ErrorLabel::Correct) ++errors;
        auto& s = steps[static_cast<int>(by_id.at(traces[i].task.id)->steps.size())];
        s.first += scores[i];
        ++s.second;
    }
    r.accuracy = r.n ? static_cast<double>(hits) / static_cast<double>(r.n) : 0.0;
    for (const auto& [label, count] : r.label_counts) {
        if (label != "Correct") r.errors[label] = static_cast<double>(count) / static_cast<double>(errors);
    }
    for (const auto& [k, s] : steps) r.by_steps[k] = static_cast<double>(s.first) / static_cast<double>(s.second);
    return r;
}

Json report_to_json(const EvalReport& r) {
    Json j;
    j["accuracy"] = r.accuracy;
    j["metric"] = to_string(r.metric);
    j["n"] = r.n;
    j["errors"] = Json::object();
    for (const auto& [k, v] : r.errors) j["errors"][k] = v;
    j["by_steps"] = Json::object();
    for (const auto& [k, v] : r.by_steps) j["by_steps"][std::to_string(k)] = v;
    return j;
}

std::string report_table(const EvalReport& r) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "metric    %s\nexamples  %zu\naccuracy  %.4f\n", to_string(r.metric), r.n,
                  r.accuracy);
    out += buf;
    out += "\nsteps  accuracy\n";
    for (const auto& [k, v] : r.by_steps) {
        std::snprintf(buf, sizeof buf, "%5d  %.4f\n", k, v);
        out += buf;
    }
    out += "\nlabel                  count  share-of-errors\n";
    for (const auto& [label, count] : r.label_counts) {
        const auto it = r.errors.find(label);
        if (it == r.errors.end()) {
            std::snprintf(buf, sizeof buf, "%-21s  %5zu  -\n", label.c_str(), count);
        } else {
            std::snprintf(buf, sizeof buf, "%-21s  %5zu  %.4f\n", label.c_str(), count, it->second);
        }
        out += buf;
    }
    return out;
}

}  // namespace reasonforge
