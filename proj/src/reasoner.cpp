#include "reasonforge/reasoner.hpp"

#include <sstream>

#include "reasonforge/error.hpp"

namespace reasonforge {

PolicyStep ScriptedPolicy::step(const PolicyInput& input) {
    const std::size_t k = input.prior_sub_questions.size();
    if (k >= script_.size()) throw Error::policy("script exhausted after " + std::to_string(k) + " steps");
    return script_[k];
}

Json encode_policy_request(const PolicyInput& input, bool attach_image) {
    Json j;
    j["question"] = input.question;
    j["prior_sub_questions"] = input.prior_sub_questions;
    j["view"] = view_to_json(input.view);
    j["image_png_b64"] = attach_image ? base64_encode(encode_png(
                                            render(input.scene, input.view, input.scene.width, input.scene.height)))
                                      : "";
    if (input.prior_outputs) {
        Json outs = Json::array();
        for (const auto& o : *input.prior_outputs) outs.push_back(output_to_json(o));
        j["prior_outputs"] = std::move(outs);
    }
    return j;
}

PolicyStep decode_policy_response(const Json& response) {
    if (!response.is_object()) throw Error::policy("response is not an object");
    if (!response.contains("sub_question") || !response.at("sub_question").is_string()) {
        throw Error::policy("response lacks 'sub_question'");
    }
    PolicyStep s;
    s.sub_question = response.at("sub_question").get<std::string>();
    try {
        s.invocation = invocation_from_json(response);
        check_invocation(s.invocation);
    } catch (const Error& e) {
        throw Error::policy(std::string("malformed invocation: ") + e.what());
    }
    return s;
}

PolicyStep RemotePolicy::step(const PolicyInput& input) {
    try {
        return decode_policy_response(transport_->call("/v1/policy/step", encode_policy_request(input, attach_image_)));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Policy) throw;
        throw Error::policy(transport_->endpoint() + ": " + e.what());
    }
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Answered: return "answered";
        case Termination::MaxSteps: return "max_steps";
        case Termination::PolicyError: return "policy_error";
        case Termination::ExecutionError: return "execution_error";
    }
    return "unknown";
}

Termination termination_from_string(std::string_view s) {
    for (auto t : {Termination::Answered, Termination::MaxSteps, Termination::PolicyError,
                   Termination::ExecutionError}) {
        if (s == to_string(t)) return t;
    }
    throw Error::parse("unknown termination '" + std::string(s) + "'");
}

ViewState advance_view(const ViewState& tool_view, const ToolOutput& output) {
    if (const auto* img = std::get_if<ImageOut>(&output)) return img->view;
    return tool_view;
}

namespace {

// Executes one invocation from I_k, filling the step; returns false on failure.
bool execute_step(Step& step, const ToolPool& tools) {
    try {
        step.view_before = tools.preprocess(step.input_view, step.invocation.kind);
        step.output = tools.execute(step.view_before, step.invocation);
        return true;
    } catch (const std::exception& e) {
        step.output.reset();
        step.error = e.what();
        return false;
    }
}

void finish_answered(Trace& trace) {
    trace.termination = Termination::Answered;
    trace.final_answer = std::get<AnswerOut>(*trace.steps.back().output).answer;
}

void fail(Trace& trace, Termination t, int step, std::string message) {
    trace.termination = t;
    trace.error_step = step;
    trace.error = std::move(message);
}

}  // namespace

Trace run(const ReasoningTask& task, Policy& policy, const ToolPool& tools, const RunOptions& options) {
    if (options.max_steps < 1) throw Error::precondition("max_steps must be >= 1");
    if (task.question.empty()) throw Error::precondition("task " + task.id + " has an empty question");
    const Scene& scene = tools.scenes().at(task.scene_id);

    Trace trace;
    trace.task = task;
    ViewState view = full_view(scene);
    std::vector<std::string> prior;
    std::vector<ToolOutput> outputs;
    for (int k = 1; k <= options.max_steps; ++k) {
        PolicyStep proposal;
        try {
            proposal = policy.step(PolicyInput{scene, view, task.question, prior,
                                               options.context_passthrough ? &outputs : nullptr});
            check_invocation(proposal.invocation);
        } catch (const std::exception& e) {
            fail(trace, Termination::PolicyError, k, e.what());
            return trace;
        }
        Step step;
        step.index = k;
        step.input_view = view;
        step.sub_question = proposal.sub_question;
        step.invocation = proposal.invocation;
        const bool ok = execute_step(step, tools);
        trace.steps.push_back(step);
        if (!ok) {
            fail(trace, Termination::ExecutionError, k, step.error);
            return trace;
        }
        if (step.invocation.kind == ToolKind::Answer) {
            finish_answered(trace);
            return trace;
        }
        view = advance_view(step.view_before, *step.output);
        prior.push_back(step.sub_question);
        outputs.push_back(*step.output);
    }
    trace.termination = Termination::MaxSteps;
    return trace;
}

Trace replay(const Trace& recorded, const ToolPool& tools) {
    if (recorded.steps.empty()) throw Error::precondition("cannot replay a trace without steps");
    Trace trace;
    trace.task = recorded.task;
    ViewState view = recorded.steps.front().input_view;
    for (const Step& r : recorded.steps) {
        Step step;
        step.index = r.index;
        step.input_view = view;
        step.sub_question = r.sub_question;
        step.invocation = r.invocation;
        const bool ok = execute_step(step, tools);
        trace.steps.push_back(step);
        if (!ok) {
            fail(trace, Termination::ExecutionError, step.index, step.error);
            return trace;
        }
        if (step.invocation.kind == ToolKind::Answer) {
            finish_answered(trace);
            return trace;
        }
        view = advance_view(step.view_before, *step.output);
    }
    // the recorded run stopped without answering; keep its reason
    trace.termination = recorded.termination == Termination::Answered ? Termination::MaxSteps : recorded.termination;
    trace.error_step = recorded.error_step;
    trace.error = recorded.error;
    return trace;
}

// ---------------------------------------------------------------- JSON

namespace {

Json opt_string(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::optional<std::string> get_opt_string(const Json& j, const char* key) {
    const Json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<std::string>();
}

}  // namespace

Json trace_to_json(const Trace& trace) {
    Json j;
    j["format"] = "v1";
    j["kind"] = "trace";
    j["task"] = {{"id", trace.task.id},
                 {"scene_id", trace.task.scene_id},
                 {"question", trace.task.question},
                 {"gold_answer", opt_string(trace.task.gold_answer)}};
    Json steps = Json::array();
    for (const Step& s : trace.steps) {
        Json js;
        js["index"] = s.index;
        js["sub_question"] = s.sub_question;
        js["invocation"] = invocation_to_json(s.invocation);
        js["input_view"] = view_to_json(s.input_view);
        js["view_before"] = view_to_json(s.view_before);
        js["output"] = s.output ? output_to_json(*s.output) : Json(nullptr);
        js["error"] = s.error;
        steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
    j["final_answer"] = opt_string(trace.final_answer);
    j["termination"] = {{"kind", to_string(trace.termination)},
                        {"step", trace.error_step},
                        {"message", trace.error}};
    return j;
}

Trace trace_from_json(const Json& j) {
    try {
        if (j.at("format") != "v1" || j.at("kind") != "trace") throw Error::parse("not a v1 trace record");
        Trace t;
        const Json& task = j.at("task");
        t.task.id = task.at("id").get<std::string>();
        t.task.scene_id = task.at("scene_id").get<std::string>();
        t.task.question = task.at("question").get<std::string>();
        t.task.gold_answer = get_opt_string(task, "gold_answer");
        for (const Json& js : j.at("steps")) {
            Step s;
            s.index = js.at("index").get<int>();
            s.sub_question = js.at("sub_question").get<std::string>();
            s.invocation = invocation_from_json(js.at("invocation"));
            s.input_view = view_from_json(js.at("input_view"));
            s.view_before = view_from_json(js.at("view_before"));
            if (!js.at("output").is_null()) s.output = output_from_json(js.at("output"));
            s.error = js.at("error").get<std::string>();
            t.steps.push_back(std::move(s));
        }
        t.final_answer = get_opt_string(j, "final_answer");
        const Json& term = j.at("termination");
        t.termination = termination_from_string(term.at("kind").get<std::string>());
        t.error_step = term.at("step").get<int>();
        t.error = term.at("message").get<std::string>();
        return t;
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("trace: ") + e.what());
    }
}

std::string serialize_traces(const std::vector<Trace>& traces) {
    std::string out;
    for (const auto& t : traces) {
        out += trace_to_json(t).dump();
        out += '\n';
    }
    return out;
}

std::vector<Trace> parse_traces(std::string_view text) {
    std::vector<Trace> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(trace_from_json(Json::parse(line)));
        } catch (const Json::parse_error& e) {
            throw Error::parse("traces line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error::parse("traces line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace reasonforge
