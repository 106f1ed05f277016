#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reasonforge/canvas.hpp"
#include "reasonforge/random.hpp"
#include "reasonforge/reasoner.hpp"
#include "reasonforge/tools.hpp"

namespace reasonforge {

enum class NodeKind { SingleEntity, EntityGroup, WholeImage };

const char* to_string(NodeKind kind);

struct SizeProfile {
    double width_frac = 0;
    double height_frac = 0;
    double area_frac = 0;

    friend bool operator==(const SizeProfile&, const SizeProfile&) = default;
};

/// Attribute dictionary of a node. Which fields are meaningful depends on kind:
/// SingleEntity uses label/location/color/text/size, EntityGroup uses
/// caption/member_ids/labels/location, WholeImage uses caption.
struct NodeProfile {
    NodeKind kind = NodeKind::WholeImage;
    std::string label;
    BBox location;
    std::optional<std::string> color;
    std::vector<std::string> text;
    SizeProfile size;
    std::string caption;
    std::vector<std::string> member_ids;
    std::vector<std::string> labels;  // member labels, sorted, with repeats

    friend bool operator==(const NodeProfile&, const NodeProfile&) = default;
};

Json profile_to_json(const NodeProfile& profile);
NodeProfile profile_from_json(const Json& j);

struct Node {
    std::string id;  // entity id, "g:<id>+<id>..." or "whole"
    ViewState view;
    NodeProfile profile;

    bool is_single() const { return profile.kind == NodeKind::SingleEntity; }
    bool is_group() const { return profile.kind == NodeKind::EntityGroup; }
    bool is_whole() const { return profile.kind == NodeKind::WholeImage; }
};

/// Entities with confidence strictly above `min_confidence`, in scene order.
std::vector<Entity> recognize_entities(const Scene& scene, double min_confidence);

/// Single-entity nodes in entity order, then one group node per cluster of
/// two or more entities linked by bbox_gap <= delta * diagonal, then the
/// whole-image node.
std::vector<Node> build_nodes(const Scene& scene, const std::vector<Entity>& entities, double delta);

struct Chain {
    std::vector<Node> nodes;           // N_1 .. N_M, N_M whole-image
    std::vector<ToolKind> edge_tools;  // t_1 .. t_{M-1}
};

struct ChainSpec {
    std::vector<std::string> nodes;
    std::vector<ToolKind> tools;

    std::string key() const;
    friend bool operator==(const ChainSpec&, const ChainSpec&) = default;
};

ChainSpec chain_spec(const Chain& chain);
Json chain_spec_to_json(const ChainSpec& spec);
ChainSpec chain_spec_from_json(const Json& j);
/// Rebuilds node profiles for a recorded chain from the scene.
Chain resolve_chain(const Scene& scene, const ChainSpec& spec);

/// Edge compatibility. `terminal` marks the (N_1, N_2) edge, which also
/// requires a single-entity head to lie inside a single-entity tail.
bool connectable(const Node& head, const Node& tail, bool terminal, double near_distance);
/// Whether `tool` may act on `head` (tail-independent part of the rule).
bool tool_allows(const Node& head, ToolKind tool);
/// Full check for the terminal edge.
bool terminal_allows(const Node& head, ToolKind tool, const Node& tail, double near_distance);

/// Queue-grown chain: the target length is drawn from [2, max_chain_len],
/// the terminal tool and N_1 first, then intermediary nodes, then the
/// whole-image node. Returns nullopt when no valid chain starts.
std::optional<Chain> sample_chain(const std::vector<Node>& nodes, Rng& rng, int max_chain_len,
                                  double near_distance);

/// "the red bus", "the sign", "the buses and persons", "the image".
std::string referent(const NodeProfile& p);
/// Relation word between head and tail, empty for a whole-image tail.
std::string relation(const NodeProfile& head, const NodeProfile& tail);
/// Label counted by a group's count question.
std::string count_label(const NodeProfile& group);

struct GeneratedQuestion {
    std::string sub_question;
    ToolInvocation invocation;
};

class Questioner {
public:
    virtual ~Questioner() = default;
    virtual GeneratedQuestion generate(const NodeProfile& head, const NodeProfile& tail, ToolKind tool) = 0;
};

class Combiner {
public:
    virtual ~Combiner() = default;
    virtual std::string combine(const std::string& outer, const std::string& inner) = 0;
};

class TemplateQuestioner final : public Questioner {
public:
    GeneratedQuestion generate(const NodeProfile& head, const NodeProfile& tail, ToolKind tool) override;
};

/// Substitutes the inner question's noun phrase for its leading referent in
/// the outer question.
class TemplateCombiner final : public Combiner {
public:
    std::string combine(const std::string& outer, const std::string& inner) override;
};

/// POST /v1/generate/question.
class RemoteQuestioner final : public Questioner {
public:
    explicit RemoteQuestioner(std::shared_ptr<Transport> t) : transport_(std::move(t)) {}
    GeneratedQuestion generate(const NodeProfile& head, const NodeProfile& tail, ToolKind tool) override;

private:
    std::shared_ptr<Transport> transport_;
};

/// POST /v1/generate/combine.
class RemoteCombiner final : public Combiner {
public:
    explicit RemoteCombiner(std::shared_ptr<Transport> t) : transport_(std::move(t)) {}
    std::string combine(const std::string& outer, const std::string& inner) override;

private:
    std::shared_ptr<Transport> transport_;
};

/// Server side of the generator protocol backed by the templates.
Json handle_generator_request(const std::string& route, const Json& request);

struct PathStep {
    ViewState view;  // I_k
    std::string sub_question;
    ToolInvocation invocation;

    friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct ReasoningPath {
    std::string id;
    std::string scene_id;
    std::string main_question;
    std::string gold_answer;
    std::vector<PathStep> steps;  // execution order
    ChainSpec chain;

    friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
};

std::vector<PolicyStep> script_of(const ReasoningPath& path);
ReasoningTask task_of(const ReasoningPath& path);

/// Builds R and Q for a chain and fills views and the gold answer by oracle
/// execution. Throws Error(Synthesis) when a generator fails or the oracle
/// cannot execute the path.
ReasoningPath synthesize_path(const Scene& scene, const Chain& chain, Questioner& questioner, Combiner& combiner,
                              double alpha = 0.2);

struct ValidationReport {
    bool sub_question = true;
    bool argument = true;
    bool main_question = true;
    std::vector<std::string> diagnostics;

    bool ok() const { return sub_question && argument && main_question; }
};

struct ValidationOptions {
    double alpha = 0.2;
    double delta = 0.05;
};

ValidationReport validate_example(const ReasoningPath& path, const Scene& scene, const ValidationOptions& options = {});

struct GeneratorBinding {
    std::string questioner_endpoint;  // empty = templates
    std::string combiner_endpoint;    // empty = templates
    std::uint64_t rng_seed = 42;
    double proximity_delta = 0.05;
    double min_confidence = 0.5;
    int max_in_flight = 1;
    int timeout_ms = 30000;

    /// Throws Error(Config).
    void check() const;
};

struct SynthesisOptions {
    int per_scene = 5;
    int max_chain_len = 4;
    int parallelism = 1;
    double alpha = 0.2;
    /// Chain samples tried per requested path before a scene gives up.
    int attempts_per_path = 50;
};

/// Validator-passing paths ordered by scene, then chain index. The result
/// does not depend on `parallelism`.
std::vector<ReasoningPath> synthesize_dataset(const SceneSet& scenes, const GeneratorBinding& binding,
                                              const SynthesisOptions& options);

}  // namespace reasonforge
