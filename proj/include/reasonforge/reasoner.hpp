#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reasonforge/canvas.hpp"
#include "reasonforge/tools.hpp"

namespace reasonforge {

struct ReasoningTask {
    std::string id;
    std::string scene_id;
    std::string question;
    std::optional<std::string> gold_answer;

    friend bool operator==(const ReasoningTask&, const ReasoningTask&) = default;
};

struct PolicyInput {
    const Scene& scene;
    const ViewState& view;  // I_k
    const std::string& question;
    const std::vector<std::string>& prior_sub_questions;
    /// Only set when context passthrough is enabled.
    const std::vector<ToolOutput>* prior_outputs = nullptr;
};

struct PolicyStep {
    std::string sub_question;
    ToolInvocation invocation;

    friend bool operator==(const PolicyStep&, const PolicyStep&) = default;
};

/// M_R: proposes the next sub-question and tool call. Implementations throw
/// on failure; the engine records it as a PolicyError.
class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyStep step(const PolicyInput& input) = 0;
};

/// Replays a fixed script, indexed by the number of prior sub-questions.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<PolicyStep> script) : script_(std::move(script)) {}
    PolicyStep step(const PolicyInput& input) override;

private:
    std::vector<PolicyStep> script_;
};

/// POST {endpoint}/v1/policy/step.
class RemotePolicy final : public Policy {
public:
    RemotePolicy(std::shared_ptr<Transport> transport, bool attach_image = true)
        : transport_(std::move(transport)), attach_image_(attach_image) {}
    PolicyStep step(const PolicyInput& input) override;

private:
    std::shared_ptr<Transport> transport_;
    bool attach_image_;
};

Json encode_policy_request(const PolicyInput& input, bool attach_image);
PolicyStep decode_policy_response(const Json& response);

struct Step {
    int index = 1;
    ViewState input_view;   // I_k, what the policy saw
    ViewState view_before;  // tool input after crop-and-enlarge
    std::string sub_question;
    ToolInvocation invocation;
    std::optional<ToolOutput> output;  // absent when execution failed
    std::string error;

    friend bool operator==(const Step&, const Step&) = default;
};

enum class Termination { Answered, MaxSteps, PolicyError, ExecutionError };

const char* to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct Trace {
    ReasoningTask task;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;
    Termination termination = Termination::MaxSteps;
    /// 1-based step at which a PolicyError/ExecutionError happened, else 0.
    int error_step = 0;
    std::string error;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// I_{k+1} = r_k when r_k is an image, I_k (as handed to the tool) otherwise.
ViewState advance_view(const ViewState& tool_view, const ToolOutput& output);

struct RunOptions {
    int max_steps = 8;
    /// Also hand prior tool outputs to the policy. Off by default.
    bool context_passthrough = false;
};

/// The reasoning loop. Never throws for policy or tool failures; those end
/// the trace in-band. Throws Error(Precondition) for max_steps < 1, an empty
/// question or an unknown scene.
Trace run(const ReasoningTask& task, Policy& policy, const ToolPool& tools, const RunOptions& options = {});

/// Re-executes the recorded invocations from the recorded starting view.
/// Throws Error(Precondition) for a trace without steps.
Trace replay(const Trace& trace, const ToolPool& tools);

Json trace_to_json(const Trace& trace);
Trace trace_from_json(const Json& j);
std::string serialize_traces(const std::vector<Trace>& traces);
std::vector<Trace> parse_traces(std::string_view text);

}  // namespace reasonforge
