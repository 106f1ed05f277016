#pragma once

#include <map>
#include <string>
#include <vector>

#include "reasonforge/reasoner.hpp"
#include "reasonforge/synthesis.hpp"

namespace reasonforge {

enum class MetricKind { ExactMatch, AnswerRecall };

const char* to_string(MetricKind m);  // "em" | "recall"
MetricKind metric_from_string(std::string_view s);

/// Lowercase, trim, collapse internal whitespace, strip trailing . , ! ?
std::string normalize(std::string_view answer);

/// EM: normalized strings equal. Recall: normalized gold is a substring of
/// the normalized prediction.
int score(std::string_view pred, std::string_view gold, MetricKind metric);

enum class ErrorLabel {
    Reasoning_Tool,
    Reasoning_Arguments,
    Execution_Grounding,
    Execution_OCR,
    Execution_Highlight,
    Inference_Wrong,
    Inference_Missing,
    Correct,
};

const char* to_string(ErrorLabel l);

/// Error attribution by walking predicted and gold steps in parallel:
///   missing step or different tool                  -> Reasoning_Tool
///   predicted call, replayed on the gold view,
///   yields a different output (or fails)            -> Reasoning_Arguments
///   recorded output differs from that replay        -> Execution_<tool>
///   steps agree, final answer fails EM              -> Inference_Missing when
///                                                      no alphanumeric token is
///                                                      shared with gold, else
///                                                      Inference_Wrong
/// A recorded Answer output is never an execution error; it is judged by the
/// final-answer rule. An empty trace is Inference_Missing.
ErrorLabel classify_error(const Trace& pred, const ReasoningPath& gold, const ToolPool& tools);

struct EvalReport {
    MetricKind metric = MetricKind::ExactMatch;
    std::size_t n = 0;
    double accuracy = 0;
    std::map<std::string, std::size_t> label_counts;
    std::map<std::string, double> errors;  // fractions over non-Correct traces
    std::map<int, double> by_steps;        // accuracy per gold step count
};

/// Pairs traces with gold paths by id. Throws Error(Precondition) listing
/// unmatched ids on either side.
EvalReport evaluate_corpus(const std::vector<Trace>& traces, const std::vector<ReasoningPath>& gold,
                           const ToolPool& tools, MetricKind metric, int parallelism = 1);

Json report_to_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

}  // namespace reasonforge
