#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "reasonforge/canvas.hpp"
#include "reasonforge/scene.hpp"
#include "reasonforge/wire.hpp"

namespace reasonforge {

enum class ToolKind { Grounding = 0, Highlight = 1, OCR = 2, Answer = 3 };
inline constexpr std::array<ToolKind, 4> kAllTools{ToolKind::Grounding, ToolKind::Highlight, ToolKind::OCR,
                                                   ToolKind::Answer};

enum class OutputClass { Image, Text };

const char* to_string(ToolKind kind);
/// Accepts the lowercase wire names ("grounding", "highlight", "ocr", "answer").
ToolKind tool_from_string(std::string_view name);

constexpr OutputClass output_class(ToolKind k) {
    return (k == ToolKind::Grounding || k == ToolKind::Highlight) ? OutputClass::Image : OutputClass::Text;
}
/// Tools that read information out of the image; only these trigger the
/// crop-and-enlarge rule.
constexpr bool is_inferring(ToolKind k) { return k == ToolKind::OCR || k == ToolKind::Answer; }

struct ToolInvocation {
    ToolKind kind = ToolKind::Answer;
    std::string target_entity;            // Grounding, Highlight
    std::string question;                 // Answer
    std::vector<std::string> characters;  // Answer, may be empty

    static ToolInvocation grounding(std::string target) { return {ToolKind::Grounding, std::move(target), {}, {}}; }
    static ToolInvocation highlight(std::string target) { return {ToolKind::Highlight, std::move(target), {}, {}}; }
    static ToolInvocation ocr() { return {ToolKind::OCR, {}, {}, {}}; }
    static ToolInvocation answer(std::string q, std::vector<std::string> chars = {}) {
        return {ToolKind::Answer, {}, std::move(q), std::move(chars)};
    }

    friend bool operator==(const ToolInvocation&, const ToolInvocation&) = default;
};

/// Throws Error(Precondition) when required fields are empty or fields not
/// used by the kind are set.
void check_invocation(const ToolInvocation& inv);

Json invocation_to_json(const ToolInvocation& inv);
ToolInvocation invocation_from_json(const Json& j);

struct ImageOut {
    ViewState view;
    friend bool operator==(const ImageOut&, const ImageOut&) = default;
};
struct TextOut {
    std::vector<std::string> items;
    friend bool operator==(const TextOut&, const TextOut&) = default;
};
struct AnswerOut {
    std::string answer;
    friend bool operator==(const AnswerOut&, const AnswerOut&) = default;
};

using ToolOutput = std::variant<ImageOut, TextOut, AnswerOut>;

OutputClass output_class(const ToolOutput& out);
Json output_to_json(const ToolOutput& out);
ToolOutput output_from_json(const Json& j);
/// One-line human-readable digest used in transcripts and tables.
std::string summarize(const ToolOutput& out);

struct BackendChoice {
    std::string endpoint;  // empty = oracle
    bool is_oracle() const { return endpoint.empty(); }
    friend bool operator==(const BackendChoice&, const BackendChoice&) = default;
};

struct ToolBackendBinding {
    std::array<BackendChoice, 4> per_tool{};
    /// Crop-and-enlarge threshold as a fraction of scene area, in (0,1].
    double alpha = 0.2;
    int max_in_flight = 1;
    int timeout_ms = 30000;

    static ToolBackendBinding oracle(double alpha = 0.2) {
        ToolBackendBinding b;
        b.alpha = alpha;
        return b;
    }
    static ToolBackendBinding remote(const std::string& endpoint, double alpha = 0.2) {
        ToolBackendBinding b;
        for (auto& c : b.per_tool) c.endpoint = endpoint;
        b.alpha = alpha;
        return b;
    }
    const BackendChoice& choice(ToolKind k) const { return per_tool[static_cast<int>(k)]; }

    /// Throws Error(Config) when alpha is outside (0,1].
    void check() const;
};

/// Crop-and-enlarge preprocessing: for inferring tools, when the most recent
/// Mark covers less than `alpha` of the scene area, the view is cropped to it.
ViewState preprocess_for_tool(const ViewState& view, ToolKind kind, double alpha, const Scene& scene);

/// Entities overlapping `viewport` whose label occurs in the phrase (and whose
/// color occurs in it, if the phrase names any known color), ordered by area
/// descending then id.
std::vector<const Entity*> oracle_match(const Scene& scene, const BBox& viewport, std::string_view target);

/// Scene-graph stand-in for the answering VLM. Recognizes counting, color and
/// text questions; throws Error(Execution) "unanswerable by oracle" otherwise.
std::string oracle_answer(const Scene& scene, const ViewState& view, std::string_view question,
                          const std::vector<std::string>& characters);

/// Executes one invocation on an already-preprocessed view.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;
    virtual ToolOutput execute(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv) = 0;
};

class OracleBackend final : public ToolBackend {
public:
    ToolOutput execute(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv) override;
};

/// Wire-protocol client. Output classes are validated against the tool kind;
/// transport failures and violations surface as Error(Execution) naming the
/// tool and endpoint.
class RemoteBackend final : public ToolBackend {
public:
    explicit RemoteBackend(std::shared_ptr<Transport> transport) : transport_(std::move(transport)) {}
    ToolOutput execute(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv) override;

private:
    std::shared_ptr<Transport> transport_;
};

/// Request body for POST /v1/tool/invoke. The attached image is the view
/// rendered at the scene's full size ("enlarged to the same size").
Json encode_tool_request(const Scene& scene, const ViewState& tool_view, const ToolInvocation& inv,
                         bool attach_image = true);
/// Decodes a response; coordinates arrive in the attached image's pixel frame
/// and are mapped back to scene coordinates. Optional "mark_refs" and
/// "highlight_refs" arrays (parallel to the rects, "" for unknown) carry the
/// entity behind each rect; model backends usually omit them.
ToolOutput decode_tool_response(const Json& response, const Scene& scene, const ViewState& tool_view,
                                ToolKind kind);

/// Server side of the wire protocol backed by the oracle: used by
/// `reasonforge serve` and by tests.
Json handle_tool_request(const SceneSet& scenes, const Json& request);

/// The tool pool: scenes plus one backend per tool kind.
class ToolPool {
public:
    ToolPool(SceneSet scenes, ToolBackendBinding binding);

    const SceneSet& scenes() const { return scenes_; }
    const ToolBackendBinding& binding() const { return binding_; }
    void set_backend(ToolKind kind, std::shared_ptr<ToolBackend> backend);

    ViewState preprocess(const ViewState& view, ToolKind kind) const;
    /// Runs the backend on an already-preprocessed view.
    ToolOutput execute(const ViewState& tool_view, const ToolInvocation& inv) const;
    /// preprocess + execute.
    ToolOutput invoke(const ViewState& view, const ToolInvocation& inv) const;

private:
    SceneSet scenes_;
    ToolBackendBinding binding_;
    std::shared_ptr<TransportPool> transports_;
    std::array<std::shared_ptr<ToolBackend>, 4> backends_;
};

}  // namespace reasonforge
