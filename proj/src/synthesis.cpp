#include "reasonforge/synthesis.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "reasonforge/error.hpp"
#include "reasonforge/kernels.hpp"
#include "reasonforge/questions.hpp"
#include "reasonforge/text.hpp"

namespace reasonforge {

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::SingleEntity: return "single_entity";
        case NodeKind::EntityGroup: return "entity_group";
        case NodeKind::WholeImage: return "whole_image";
    }
    return "unknown";
}

namespace {

NodeKind node_kind_from_string(std::string_view s) {
    for (auto k : {NodeKind::SingleEntity, NodeKind::EntityGroup, NodeKind::WholeImage}) {
        if (s == to_string(k)) return k;
    }
    throw Error::parse("unknown node kind '" + std::string(s) + "'");
}

// "1 bus, 2 persons and 1 sign"
std::string label_counts(const std::vector<std::string>& sorted_labels) {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < sorted_labels.size();) {
        std::size_t j = i;
        while (j < sorted_labels.size() && sorted_labels[j] == sorted_labels[i]) ++j;
        const std::size_t n = j - i;
        parts.push_back(std::to_string(n) + " " + (n == 1 ? sorted_labels[i] : text::plural(sorted_labels[i])));
        i = j;
    }
    if (parts.size() <= 1) return parts.empty() ? "" : parts.front();
    const std::string last = parts.back();
    parts.pop_back();
    return text::join(parts, ", ") + " and " + last;
}

std::vector<std::string> distinct(std::vector<std::string> sorted) {
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    return sorted;
}

std::string and_list(const std::vector<std::string>& items) {
    if (items.size() <= 1) return items.empty() ? "" : items.front();
    std::vector<std::string> head(items.begin(), items.end() - 1);
    return text::join(head, ", ") + " and " + items.back();
}

}  // namespace

Json profile_to_json(const NodeProfile& p) {
    Json j;
    j["kind"] = to_string(p.kind);
    switch (p.kind) {
        case NodeKind::SingleEntity:
            j["label"] = p.label;
            j["location"] = bbox_to_json(p.location);
            j["color"] = p.color ? Json(*p.color) : Json(nullptr);
            j["text"] = p.text;
            j["size"] = {{"width_frac", p.size.width_frac},
                         {"height_frac", p.size.height_frac},
                         {"area_frac", p.size.area_frac}};
            break;
        case NodeKind::EntityGroup:
            j["caption"] = p.caption;
            j["member_ids"] = p.member_ids;
            j["labels"] = p.labels;
            j["location"] = bbox_to_json(p.location);
            break;
        case NodeKind::WholeImage:
            j["caption"] = p.caption;
            break;
    }
    return j;
}

NodeProfile profile_from_json(const Json& j) {
    try {
        NodeProfile p;
        p.kind = node_kind_from_string(j.at("kind").get<std::string>());
        switch (p.kind) {
            case NodeKind::SingleEntity: {
                p.label = j.at("label").get<std::string>();
                p.location = bbox_from_json(j.at("location"));
                if (!j.at("color").is_null()) p.color = j.at("color").get<std::string>();
                p.text = j.at("text").get<std::vector<std::string>>();
                const Json& s = j.at("size");
                p.size = {s.at("width_frac").get<double>(), s.at("height_frac").get<double>(),
                          s.at("area_frac").get<double>()};
                break;
            }
            case NodeKind::EntityGroup:
                p.caption = j.at("caption").get<std::string>();
                p.member_ids = j.at("member_ids").get<std::vector<std::string>>();
                p.labels = j.at("labels").get<std::vector<std::string>>();
                p.location = bbox_from_json(j.at("location"));
                break;
            case NodeKind::WholeImage:
                p.caption = j.at("caption").get<std::string>();
                break;
        }
        return p;
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("node profile: ") + e.what());
    }
}

// ---------------------------------------------------------------- nodes

std::vector<Entity> recognize_entities(const Scene& scene, double min_confidence) {
    std::vector<Entity> out;
    for (const auto& e : scene.entities) {
        if (e.confidence > min_confidence) out.push_back(e);
    }
    return out;
}

namespace {

Node single_node(const Scene& scene, const Entity& e) {
    Node n;
    n.id = e.id;
    n.view = ViewState{scene.id, e.bbox, {}};
    n.profile.kind = NodeKind::SingleEntity;
    n.profile.label = e.label;
    n.profile.location = e.bbox;
    n.profile.color = e.color;
    n.profile.text = e.text;
    n.profile.size = {e.bbox.width() / scene.width, e.bbox.height() / scene.height, area_fraction(e.bbox, scene)};
    return n;
}

Node group_node(const Scene& scene, const std::vector<const Entity*>& members) {
    Node n;
    n.profile.kind = NodeKind::EntityGroup;
    BBox loc = members.front()->bbox;
    std::vector<std::string> ids;
    for (const Entity* m : members) {
        loc = bbox_union(loc, m->bbox);
        ids.push_back(m->id);
        n.profile.labels.push_back(m->label);
    }
    std::sort(n.profile.labels.begin(), n.profile.labels.end());
    n.id = "g:" + text::join(ids, "+");
    n.profile.member_ids = ids;
    n.profile.location = loc;
    n.profile.caption = "a group of " + label_counts(n.profile.labels);
    n.view = ViewState{scene.id, loc, {}};
    return n;
}

Node whole_node(const Scene& scene, const std::vector<Entity>& entities) {
    Node n;
    n.id = "whole";
    n.view = full_view(scene);
    n.profile.kind = NodeKind::WholeImage;
    if (scene.caption) {
        n.profile.caption = *scene.caption;
    } else {
        std::vector<std::string> labels;
        for (const auto& e : entities) labels.push_back(e.label);
        std::sort(labels.begin(), labels.end());
        n.profile.caption = labels.empty() ? "an empty image" : "an image showing " + label_counts(labels);
    }
    return n;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

std::vector<Node> build_nodes(const Scene& scene, const std::vector<Entity>& entities, double delta) {
    std::vector<Node> nodes;
    nodes.reserve(entities.size() + 2);
    for (const auto& e : entities) nodes.push_back(single_node(scene, e));

    const double limit = delta * scene.diagonal();
    kernels::BoxColumns cols;
    cols.reserve(entities.size());
    for (const auto& e : entities) cols.push_back(e.bbox.x0(), e.bbox.y0(), e.bbox.x1(), e.bbox.y1());
    std::vector<std::size_t> parent(entities.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<double> gaps(entities.size());
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const BBox& b = entities[i].bbox;
        k.gap(cols, {b.x0(), b.y0(), b.x1(), b.y1()}, gaps);
        for (std::size_t j = i + 1; j < entities.size(); ++j) {
            if (gaps[j] <= limit) {
                const std::size_t ri = find_root(parent, i), rj = find_root(parent, j);
                if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
            }
        }
    }
    // clusters keyed by their first member, so groups come out in entity order
    std::map<std::size_t, std::vector<const Entity*>> clusters;
    for (std::size_t i = 0; i < entities.size(); ++i) clusters[find_root(parent, i)].push_back(&entities[i]);
    for (const auto& [root, members] : clusters) {
        if (members.size() >= 2) nodes.push_back(group_node(scene, members));
    }
    nodes.push_back(whole_node(scene, entities));
    return nodes;
}

// ---------------------------------------------------------------- chains

std::string ChainSpec::key() const {
    std::string s;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        s += nodes[i];
        if (i < tools.size()) s += std::string(" -") + reasonforge::to_string(tools[i]) + "-> ";
    }
    return s;
}

ChainSpec chain_spec(const Chain& chain) {
    ChainSpec s;
    for (const auto& n : chain.nodes) s.nodes.push_back(n.id);
    s.tools = chain.edge_tools;
    return s;
}

Json chain_spec_to_json(const ChainSpec& spec) {
    Json tools = Json::array();
    for (auto t : spec.tools) tools.push_back(to_string(t));
    return Json{{"nodes", spec.nodes}, {"tools", std::move(tools)}};
}

ChainSpec chain_spec_from_json(const Json& j) {
    try {
        ChainSpec s;
        s.nodes = j.at("nodes").get<std::vector<std::string>>();
        for (const auto& t : j.at("tools")) s.tools.push_back(tool_from_string(t.get<std::string>()));
        if (s.nodes.size() != s.tools.size() + 1) throw Error::parse("chain needs one more node than tools");
        return s;
    } catch (const Json::exception& e) {
        throw Error::parse(std::string("chain: ") + e.what());
    }
}

Chain resolve_chain(const Scene& scene, const ChainSpec& spec) {
    Chain chain;
    chain.edge_tools = spec.tools;
    const auto recognized = recognize_entities(scene, 0.5);
    for (const auto& id : spec.nodes) {
        if (id == "whole") {
            chain.nodes.push_back(whole_node(scene, recognized));
        } else if (text::starts_with(id, "g:")) {
            std::vector<const Entity*> members;
            std::string rest = id.substr(2);
            std::size_t start = 0;
            while (start <= rest.size()) {
                const std::size_t plus = rest.find('+', start);
                const std::string mid = rest.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
                const Entity* e = scene.find(mid);
                if (!e) throw Error::precondition("chain names unknown entity '" + mid + "'");
                members.push_back(e);
                if (plus == std::string::npos) break;
                start = plus + 1;
            }
            if (members.size() < 2) throw Error::precondition("group node '" + id + "' has fewer than 2 members");
            chain.nodes.push_back(group_node(scene, members));
        } else {
            const Entity* e = scene.find(id);
            if (!e) throw Error::precondition("chain names unknown entity '" + id + "'");
            chain.nodes.push_back(single_node(scene, *e));
        }
    }
    return chain;
}

namespace {

bool is_member(const NodeProfile& group, const std::string& id) {
    return std::find(group.member_ids.begin(), group.member_ids.end(), id) != group.member_ids.end();
}

bool head_inside(const NodeProfile& head, const NodeProfile& tail) { return tail.location.contains(head.location); }

}  // namespace

bool connectable(const Node& head, const Node& tail, bool terminal, double near_distance) {
    if (head.is_whole() || head.id == tail.id) return false;
    if (tail.is_whole()) return true;
    if (!head.is_single()) return false;
    if (tail.is_group()) return is_member(tail.profile, head.id);
    if (head_inside(head.profile, tail.profile)) return true;
    return !terminal && bbox_gap(head.profile.location, tail.profile.location) <= near_distance;
}

bool tool_allows(const Node& head, ToolKind tool) {
    switch (tool) {
        case ToolKind::Grounding: return head.is_single();
        case ToolKind::Highlight: return head.is_group();
        case ToolKind::OCR: return head.is_single() && !head.profile.text.empty();
        case ToolKind::Answer: return head.is_single() || head.is_group();
    }
    return false;
}

bool terminal_allows(const Node& head, ToolKind tool, const Node& tail, double near_distance) {
    if (output_class(tool) != OutputClass::Text || !tool_allows(head, tool)) return false;
    if (!connectable(head, tail, true, near_distance)) return false;
    if (tool == ToolKind::Answer && head.is_single() && !tail.is_group()) {
        return head.profile.color.has_value() || !head.profile.text.empty();
    }
    return true;
}

std::optional<Chain> sample_chain(const std::vector<Node>& nodes, Rng& rng, int max_chain_len,
                                  double near_distance) {
    if (max_chain_len < 2) throw Error::precondition("max_chain_len must be >= 2");
    const auto whole_it = std::find_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_whole(); });
    if (whole_it == nodes.end()) return std::nullopt;
    const Node& whole = *whole_it;
    const int target = rng.between(2, max_chain_len);

    // terminal tool and N_1: any node that admits the tool towards some tail
    std::vector<ToolKind> terminal_tools{ToolKind::OCR, ToolKind::Answer};
    rng.shuffle(terminal_tools);
    std::vector<const Node*> chain;
    std::vector<ToolKind> tools;
    for (ToolKind t : terminal_tools) {
        std::vector<const Node*> candidates;
        for (const auto& n : nodes) {
            if (n.is_whole() || !tool_allows(n, t)) continue;
            const bool any_tail = std::any_of(nodes.begin(), nodes.end(),
                                              [&](const Node& tail) { return terminal_allows(n, t, tail, near_distance); });
            if (any_tail) candidates.push_back(&n);
        }
        if (candidates.empty()) continue;
        chain.push_back(candidates[rng.index(candidates.size())]);
        tools.push_back(t);
        break;
    }
    if (chain.empty()) return std::nullopt;

    // intermediary nodes, each the head of a graphical edge
    while (static_cast<int>(chain.size()) < target - 1) {
        std::vector<ToolKind> graphical{ToolKind::Grounding, ToolKind::Highlight};
        rng.shuffle(graphical);
        const Node* prev = chain.back();
        const bool terminal = chain.size() == 1;
        const Node* picked = nullptr;
        for (ToolKind t : graphical) {
            std::vector<const Node*> candidates;
            for (const auto& n : nodes) {
                if (n.is_whole() || !tool_allows(n, t)) continue;
                if (std::find(chain.begin(), chain.end(), &n) != chain.end()) continue;
                if (terminal ? !terminal_allows(*chain.front(), tools.front(), n, near_distance)
                             : !connectable(*prev, n, false, near_distance)) {
                    continue;
                }
                candidates.push_back(&n);
            }
            if (candidates.empty()) continue;
            picked = candidates[rng.index(candidates.size())];
            tools.push_back(t);
            break;
        }
        if (!picked) break;
        chain.push_back(picked);
        if (picked->is_group()) break;  // a group only connects to the whole image
    }
    if (chain.size() == 1 && !terminal_allows(*chain.front(), tools.front(), whole, near_distance)) {
        return std::nullopt;
    }
    chain.push_back(&whole);

    Chain out;
    for (const Node* n : chain) out.nodes.push_back(*n);
    out.edge_tools = std::move(tools);
    return out;
}

// ---------------------------------------------------------------- templates

std::string referent(const NodeProfile& p) {
    switch (p.kind) {
        case NodeKind::SingleEntity: return "the " + (p.color ? *p.color + " " : std::string()) + p.label;
        case NodeKind::EntityGroup: {
            std::vector<std::string> plurals;
            for (const auto& l : distinct(p.labels)) plurals.push_back(text::plural(l));
            return "the " + and_list(plurals);
        }
        case NodeKind::WholeImage: return "the image";
    }
    return "";
}

std::string relation(const NodeProfile& head, const NodeProfile& tail) {
    switch (tail.kind) {
        case NodeKind::WholeImage: return "";
        case NodeKind::EntityGroup: return "in";
        case NodeKind::SingleEntity: return head_inside(head, tail) ? "on" : "near";
    }
    return "";
}

std::string count_label(const NodeProfile& group) {
    std::string best;
    std::size_t best_n = 0;
    for (std::size_t i = 0; i < group.labels.size();) {
        std::size_t j = i;
        while (j < group.labels.size() && group.labels[j] == group.labels[i]) ++j;
        if (j - i > best_n) {
            best_n = j - i;
            best = group.labels[i];
        }
        i = j;
    }
    return best;
}

namespace {

std::string clause(const NodeProfile& head, const NodeProfile& tail) {
    const std::string rel = relation(head, tail);
    return rel.empty() ? "" : " " + rel + " " + referent(tail);
}

}  // namespace

GeneratedQuestion TemplateQuestioner::generate(const NodeProfile& head, const NodeProfile& tail, ToolKind tool) {
    auto refuse = [&](const char* why) {
        throw Error::synthesis(std::string(to_string(tool)) + " on " + to_string(head.kind) + ": " + why);
    };
    const std::string c = clause(head, tail);
    switch (tool) {
        case ToolKind::Grounding: {
            if (head.kind != NodeKind::SingleEntity) refuse("needs a single entity");
            const std::string r = referent(head);
            return {render_question(QuestionForm::Where, r + c), ToolInvocation::grounding(r)};
        }
        case ToolKind::Highlight: {
            if (head.kind == NodeKind::WholeImage) refuse("needs entities");
            const std::string r = referent(head);
            return {render_question(QuestionForm::Where, r + c, true), ToolInvocation::highlight(r)};
        }
        case ToolKind::OCR: {
            if (head.kind != NodeKind::SingleEntity || head.text.empty()) refuse("needs text");
            return {render_question(QuestionForm::Text, referent(head) + c), ToolInvocation::ocr()};
        }
        case ToolKind::Answer: {
            std::string q;
            if (head.kind == NodeKind::EntityGroup) {
                q = render_question(QuestionForm::Count, text::plural(count_label(head)) + c);
            } else if (head.kind != NodeKind::SingleEntity) {
                refuse("nothing to ask about");
            } else if (tail.kind == NodeKind::EntityGroup) {
                q = render_question(QuestionForm::Count, text::plural(head.label) + c);
            } else if (head.color) {
                q = render_question(QuestionForm::Color, "the " + head.label + c);
            } else if (!head.text.empty()) {
                q = render_question(QuestionForm::Text, referent(head) + c);
            } else {
                refuse("no color or text to ask about");
            }
            return {q, ToolInvocation::answer(q)};
        }
    }
    refuse("unknown tool");
    return {};
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool word_boundary(const std::string& s, std::size_t at, std::size_t len) {
    const auto is_word = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; };
    return (at == 0 || !is_word(s[at - 1])) && (at + len >= s.size() || !is_word(s[at + len]));
}

}  // namespace

std::string TemplateCombiner::combine(const std::string& outer, const std::string& inner) {
    const ParsedQuestion pq = parse_question(inner);
    if (pq.form != QuestionForm::Where) throw Error::synthesis("combiner expects a where-question, got '" + inner + "'");
    const std::vector<std::string> words = split_words(pq.np);
    for (std::size_t len = words.size(); len >= 2; --len) {
        const std::string prefix = text::join(std::vector<std::string>(words.begin(), words.begin() + len), " ");
        std::size_t at = outer.rfind(prefix);
        while (at != std::string::npos && !word_boundary(outer, at, prefix.size())) {
            at = at == 0 ? std::string::npos : outer.rfind(prefix, at - 1);
        }
        if (at != std::string::npos) return outer.substr(0, at) + pq.np + outer.substr(at + prefix.size());
    }
    throw Error::synthesis("cannot combine '" + outer + "' with '" + inner + "'");
}

GeneratedQuestion RemoteQuestioner::generate(const NodeProfile& head, const NodeProfile& tail, ToolKind tool) {
    const Json req{{"head_profile", profile_to_json(head)}, {"tail_profile", profile_to_json(tail)},
                   {"tool", to_string(tool)}};
    try {
        const Json resp = transport_->call("/v1/generate/question", req);
        GeneratedQuestion g;
        g.sub_question = resp.at("sub_question").get<std::string>();
        g.invocation = invocation_from_json(Json{{"tool", to_string(tool)}, {"args", resp.value("args", Json::object())}});
        check_invocation(g.invocation);
        return g;
    } catch (const std::exception& e) {
        throw Error::synthesis("questioner at " + transport_->endpoint() + ": " + e.what());
    }
}

std::string RemoteCombiner::combine(const std::string& outer, const std::string& inner) {
    try {
        const Json resp = transport_->call("/v1/generate/combine", Json{{"outer", outer}, {"inner", inner}});
        return resp.at("question").get<std::string>();
    } catch (const std::exception& e) {
        throw Error::synthesis("combiner at " + transport_->endpoint() + ": " + e.what());
    }
}

Json handle_generator_request(const std::string& route, const Json& request) {
    try {
        if (route == "/v1/generate/question") {
            TemplateQuestioner q;
            const auto g = q.generate(profile_from_json(request.at("head_profile")),
                                      profile_from_json(request.at("tail_profile")),
                                      tool_from_string(request.at("tool").get<std::string>()));
            return Json{{"sub_question", g.sub_question}, {"args", invocation_to_json(g.invocation).at("args")}};
        }
        if (route == "/v1/generate/combine") {
            TemplateCombiner c;
            return Json{{"question", c.combine(request.at("outer").get<std::string>(),
                                               request.at("inner").get<std::string>())}};
        }
        return Json{{"error", "unknown route " + route}};
    } catch (const std::exception& e) {
        return Json{{"error", e.what()}};
    }
}

// ---------------------------------------------------------------- paths

std::vector<PolicyStep> script_of(const ReasoningPath& path) {
    std::vector<PolicyStep> script;
    for (const auto& s : path.steps) script.push_back({s.sub_question, s.invocation});
    return script;
}

ReasoningTask task_of(const ReasoningPath& path) {
    return ReasoningTask{path.id, path.scene_id, path.main_question, path.gold_answer};
}

namespace {

struct Executed {
    ViewState tool_view;
    ToolOutput output;
};

Executed oracle_execute(const Scene& scene, const ViewState& view, const ToolInvocation& inv, double alpha) {
    OracleBackend oracle;
    Executed ex{preprocess_for_tool(view, inv.kind, alpha, scene), AnswerOut{}};
    ex.output = oracle.execute(scene, ex.tool_view, inv);
    return ex;
}

}  // namespace

ReasoningPath synthesize_path(const Scene& scene, const Chain& chain, Questioner& questioner, Combiner& combiner,
                              double alpha) {
    const std::size_t edges = chain.edge_tools.size();
    if (edges == 0 || chain.nodes.size() != edges + 1 || !chain.nodes.back().is_whole()) {
        throw Error::precondition("malformed chain");
    }
    std::vector<GeneratedQuestion> q(edges);  // q[m-1] = (q_m, t_m)
    for (std::size_t m = 0; m < edges; ++m) {
        q[m] = questioner.generate(chain.nodes[m].profile, chain.nodes[m + 1].profile, chain.edge_tools[m]);
        if (q[m].invocation.kind != chain.edge_tools[m]) throw Error::synthesis("questioner changed the tool");
    }
    std::string main = q[0].sub_question;
    for (std::size_t m = 1; m < edges; ++m) main = combiner.combine(main, q[m].sub_question);

    ReasoningPath path;
    path.scene_id = scene.id;
    path.main_question = main;
    path.chain = chain_spec(chain);
    for (std::size_t m = edges; m-- > 0;) path.steps.push_back({ViewState{}, q[m].sub_question, q[m].invocation});
    if (chain.edge_tools.front() == ToolKind::OCR) {
        path.steps.push_back({ViewState{}, main, ToolInvocation::answer(main)});
    }

    ViewState view = full_view(scene);
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
        PathStep& step = path.steps[k];
        step.view = view;
        Executed ex;
        try {
            ex = oracle_execute(scene, view, step.invocation, alpha);
        } catch (const Error& e) {
            throw Error::synthesis("step " + std::to_string(k + 1) + ": " + e.what());
        }
        if (const auto* t = std::get_if<TextOut>(&ex.output); t && k + 1 < path.steps.size()) {
            path.steps[k + 1].invocation.characters = t->items;
        }
        if (const auto* a = std::get_if<AnswerOut>(&ex.output)) path.gold_answer = a->answer;
        view = advance_view(ex.tool_view, ex.output);
    }
    if (path.steps.back().invocation.kind != ToolKind::Answer) throw Error::synthesis("path does not end in Answer");
    return path;
}

// ---------------------------------------------------------------- validation

namespace {

const std::set<std::string, std::less<>>& stop_words() {
    static const std::set<std::string, std::less<>> words{"where", "is", "are", "the", "a", "an", "what",
                                                          "how", "many", "there", "on", "in", "near",
                                                          "and", "of"};
    return words;
}

std::set<std::string, std::less<>> content_words(std::string_view s) {
    std::set<std::string, std::less<>> out;
    for (auto& t : text::tokens(s)) {
        if (!stop_words().count(t)) out.insert(std::move(t));
    }
    return out;
}

// The referent tokens name the node: its label(s), and no color it lacks.
bool mentions(const NodeProfile& p, std::string_view ref) {
    const auto toks = text::tokens(ref);
    if (p.kind == NodeKind::SingleEntity) {
        if (!text::label_in(p.label, toks)) return false;
        for (const auto& t : toks) {
            if (is_known_color(t) && (!p.color || text::lower(*p.color) != t)) return false;
        }
        return true;
    }
    if (p.kind == NodeKind::EntityGroup) {
        const auto labels = distinct(p.labels);
        return std::any_of(labels.begin(), labels.end(), [&](const auto& l) { return text::label_in(l, toks); });
    }
    return true;
}

std::string expected_answer(const NodeProfile& head, const NodeProfile& tail, const Scene& scene,
                            QuestionForm form) {
    if (form == QuestionForm::Color) return head.color.value_or("");
    if (form == QuestionForm::Text) return text::join(head.text, " ");
    if (form == QuestionForm::Count) {
        const NodeProfile& group = head.kind == NodeKind::EntityGroup ? head : tail;
        const std::string label = head.kind == NodeKind::EntityGroup ? count_label(head) : head.label;
        std::size_t n = 0;
        for (const auto& id : group.member_ids) {
            const Entity* e = scene.find(id);
            if (e && e->label == label) ++n;
        }
        return std::to_string(n);
    }
    return "";
}

void check_sub_questions(const Chain& chain, const ReasoningPath& path, double near_distance,
                         ValidationReport& r) {
    auto fail = [&](const std::string& why) {
        r.sub_question = false;
        r.diagnostics.push_back("sub-question: " + why);
    };
    const std::size_t edges = chain.edge_tools.size();
    for (std::size_t m = 0; m < edges; ++m) {
        const NodeProfile& head = chain.nodes[m].profile;
        const NodeProfile& tail = chain.nodes[m + 1].profile;
        const ToolKind tool = chain.edge_tools[m];
        const std::string& q = path.steps[edges - 1 - m].sub_question;
        const ParsedQuestion pq = parse_question(q);
        const std::string tag = "q" + std::to_string(m + 1) + " '" + q + "'";
        const bool graphical = output_class(tool) == OutputClass::Image;
        if (pq.form == QuestionForm::Unknown) {
            fail(tag + " is not a recognized question");
            continue;
        }
        if ((pq.form == QuestionForm::Where) != graphical) {
            fail(tag + " cannot be answered by " + to_string(tool));
            continue;
        }
        if (tool == ToolKind::OCR && pq.form != QuestionForm::Text) fail(tag + " asks OCR for something other than text");
        const NounChain np = split_noun_phrase(pq.np);
        if (!mentions(head, np.refs.front())) fail(tag + " does not describe its head node");
        if (pq.form == QuestionForm::Color && !head.color) fail(tag + " asks for a color the node lacks");
        if (pq.form == QuestionForm::Text && head.text.empty()) fail(tag + " asks for text the node lacks");
        if (pq.form == QuestionForm::Count && head.kind == NodeKind::SingleEntity && tail.kind != NodeKind::EntityGroup) {
            fail(tag + " counts without a group");
        }
        if (tail.kind != NodeKind::WholeImage) {
            if (np.refs.size() < 2) {
                fail(tag + " omits the tail node");
                continue;
            }
            if (!mentions(tail, np.refs[1])) fail(tag + " does not describe its tail node");
            const std::string& rel = np.rels.front();
            const bool rel_ok = (rel == "on" && tail.location.contains(head.location)) ||
                                (rel == "in" && tail.kind == NodeKind::EntityGroup) ||
                                (rel == "near" && bbox_gap(head.location, tail.location) <= near_distance);
            if (!rel_ok) fail(tag + " uses relation '" + rel + "' that the geometry does not support");
        }
    }
}

void check_arguments(const Chain& chain, const ReasoningPath& path, const Scene& scene, double alpha,
                     ValidationReport& r) {
    auto fail = [&](const std::string& why) {
        r.argument = false;
        r.diagnostics.push_back("argument: " + why);
    };
    const std::size_t edges = chain.edge_tools.size();
    ViewState view = full_view(scene);
    std::optional<std::string> final_answer;
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
        const PathStep& step = path.steps[k];
        const std::string tag = "step " + std::to_string(k + 1);
        if (step.view != view) fail(tag + " records a view the previous steps do not produce");
        Executed ex;
        try {
            ex = oracle_execute(scene, view, step.invocation, alpha);
        } catch (const std::exception& e) {
            fail(tag + " fails: " + e.what());
            return;
        }
        if (k < edges) {
            const std::size_t m = edges - 1 - k;
            const NodeProfile& head = chain.nodes[m].profile;
            const NodeProfile& tail = chain.nodes[m + 1].profile;
            if (step.invocation.kind != chain.edge_tools[m]) fail(tag + " uses a tool the chain does not assign");
            switch (step.invocation.kind) {
                case ToolKind::Grounding: {
                    const auto& v = std::get<ImageOut>(ex.output).view;
                    const auto* mark = v.last_mark();
                    const auto want = bbox_intersection(head.location, ex.tool_view.viewport);
                    if (!mark || v.annotations.size() != ex.tool_view.annotations.size() + 1 || !want ||
                        mark->rect != *want || mark->ref_entity_ids != std::vector<std::string>{chain.nodes[m].id}) {
                        fail(tag + " does not mark " + chain.nodes[m].id);
                    }
                    break;
                }
                case ToolKind::Highlight: {
                    const auto& v = std::get<ImageOut>(ex.output).view;
                    std::vector<std::string> got;
                    for (std::size_t i = ex.tool_view.annotations.size(); i < v.annotations.size(); ++i) {
                        const auto& ids = v.annotations[i].ref_entity_ids;
                        got.insert(got.end(), ids.begin(), ids.end());
                    }
                    std::vector<std::string> want = head.kind == NodeKind::EntityGroup
                                                        ? head.member_ids
                                                        : std::vector<std::string>{chain.nodes[m].id};
                    std::sort(got.begin(), got.end());
                    std::sort(want.begin(), want.end());
                    if (got != want) fail(tag + " highlights a different set than " + chain.nodes[m].id);
                    break;
                }
                case ToolKind::OCR: {
                    const auto& items = std::get<TextOut>(ex.output).items;
                    for (const auto& t : head.text) {
                        if (std::find(items.begin(), items.end(), t) == items.end()) {
                            fail(tag + " misses the text '" + t + "'");
                        }
                    }
                    break;
                }
                case ToolKind::Answer: {
                    const std::string want =
                        expected_answer(head, tail, scene, parse_question(step.invocation.question).form);
                    const std::string& got = std::get<AnswerOut>(ex.output).answer;
                    if (got != want) fail(tag + " answers '" + got + "', the profile implies '" + want + "'");
                    break;
                }
            }
        } else {
            // appended Answer over OCR characters
            const NodeProfile& head = chain.nodes.front().profile;
            const auto* a = std::get_if<AnswerOut>(&ex.output);
            const std::string want = text::join(head.text, " ");
            if (!a || a->answer != want) fail(tag + " does not read '" + want + "'");
        }
        if (const auto* t = std::get_if<TextOut>(&ex.output); t && k + 1 < path.steps.size()) {
            if (path.steps[k + 1].invocation.characters != t->items) fail(tag + " output is not handed on");
        }
        if (const auto* a = std::get_if<AnswerOut>(&ex.output)) final_answer = a->answer;
        view = advance_view(ex.tool_view, ex.output);
    }
    if (!final_answer || *final_answer != path.gold_answer) fail("final answer differs from the gold answer");
}

void check_main_question(const Chain& chain, const ReasoningPath& path, ValidationReport& r) {
    auto fail = [&](const std::string& why) {
        r.main_question = false;
        r.diagnostics.push_back("main question: " + why);
    };
    const auto main_words = content_words(path.main_question);
    for (const auto& s : path.steps) {
        for (const auto& w : content_words(s.sub_question)) {
            if (!main_words.count(w)) fail("'" + w + "' from '" + s.sub_question + "' is missing");
        }
    }
    // re-decompose Q with the template grammar
    const std::size_t edges = chain.edge_tools.size();
    const ParsedQuestion pq = parse_question(path.main_question);
    const NounChain np = split_noun_phrase(pq.np);
    if (pq.form == QuestionForm::Unknown || np.refs.size() != edges) {
        fail("does not decompose into " + std::to_string(edges) + " sub-questions");
        return;
    }
    auto phrase = [&](std::size_t i) {
        return i + 1 < np.refs.size() ? np.refs[i] + " " + np.rels[i] + " " + np.refs[i + 1] : np.refs[i];
    };
    for (std::size_t m = 0; m < edges; ++m) {
        const std::string want = m == 0 ? render_question(pq.form, phrase(0))
                                        : render_question(QuestionForm::Where, phrase(m),
                                                          chain.edge_tools[m] == ToolKind::Highlight);
        const std::string& got = path.steps[edges - 1 - m].sub_question;
        if (want != got) fail("decomposition yields '" + want + "' where the path has '" + got + "'");
    }
}

}  // namespace

ValidationReport validate_example(const ReasoningPath& path, const Scene& scene, const ValidationOptions& options) {
    ValidationReport r;
    Chain chain;
    try {
        chain = resolve_chain(scene, path.chain);
    } catch (const std::exception& e) {
        r.sub_question = r.argument = r.main_question = false;
        r.diagnostics.push_back(std::string("chain: ") + e.what());
        return r;
    }
    const std::size_t edges = chain.edge_tools.size();
    const std::size_t want_steps = edges + (edges > 0 && chain.edge_tools.front() == ToolKind::OCR ? 1 : 0);
    if (edges == 0 || path.steps.size() != want_steps) {
        r.sub_question = r.argument = r.main_question = false;
        r.diagnostics.push_back("path has " + std::to_string(path.steps.size()) + " steps, chain implies " +
                                std::to_string(want_steps));
        return r;
    }
    check_sub_questions(chain, path, options.delta * scene.diagonal(), r);
    check_arguments(chain, path, scene, options.alpha, r);
    check_main_question(chain, path, r);
    return r;
}

// ---------------------------------------------------------------- dataset

void GeneratorBinding::check() const {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw Error::config("min_confidence must lie in [0,1]");
    if (!(proximity_delta > 0.0)) throw Error::config("proximity delta must be > 0");
    if (max_in_flight < 1) throw Error::config("max_in_flight must be >= 1");
    for (const auto* e : {&questioner_endpoint, &combiner_endpoint}) {
        if (!e->empty() && !is_remote_endpoint(*e)) {
            throw Error::config("generator endpoint '" + *e + "' must start with http:// or exec:");
        }
    }
}

namespace {

std::vector<ReasoningPath> synthesize_scene(const Scene& scene, const GeneratorBinding& binding,
                                            const SynthesisOptions& options, Questioner& questioner,
                                            Combiner& combiner) {
    Rng rng(mix_seed(binding.rng_seed, scene.id));
    const auto entities = recognize_entities(scene, binding.min_confidence);
    std::vector<ReasoningPath> out;
    if (entities.empty()) return out;
    const auto nodes = build_nodes(scene, entities, binding.proximity_delta);
    const double near = binding.proximity_delta * scene.diagonal();
    const ValidationOptions vopt{options.alpha, binding.proximity_delta};
    std::set<std::string> seen;
    int rejected = 0;
    const int attempts = options.attempts_per_path * options.per_scene;
    for (int a = 0; a < attempts && static_cast<int>(out.size()) < options.per_scene; ++a) {
        auto chain = sample_chain(nodes, rng, options.max_chain_len, near);
        if (!chain) continue;
        if (!seen.insert(chain_spec(*chain).key()).second) continue;
        try {
            ReasoningPath path = synthesize_path(scene, *chain, questioner, combiner, options.alpha);
            const ValidationReport report = validate_example(path, scene, vopt);
            if (!report.ok()) {
                ++rejected;
                continue;
            }
            path.id = scene.id + "#" + std::to_string(out.size());
            out.push_back(std::move(path));
        } catch (const std::exception& e) {
            ++rejected;
            spdlog::debug("{}: {}", scene.id, e.what());
        }
    }
    if (static_cast<int>(out.size()) < options.per_scene) {
        spdlog::debug("{}: {} of {} paths ({} rejected)", scene.id, out.size(), options.per_scene, rejected);
    }
    return out;
}

}  // namespace

std::vector<ReasoningPath> synthesize_dataset(const SceneSet& scenes, const GeneratorBinding& binding,
                                              const SynthesisOptions& options) {
    binding.check();
    if (options.per_scene < 1) throw Error::precondition("per_scene must be >= 1");
    if (options.max_chain_len < 2) throw Error::precondition("max_chain_len must be >= 2");

    TransportPool transports(TransportOptions{binding.max_in_flight, binding.timeout_ms});
    std::unique_ptr<Questioner> questioner;
    std::unique_ptr<Combiner> combiner;
    if (binding.questioner_endpoint.empty()) {
        questioner = std::make_unique<TemplateQuestioner>();
    } else {
        questioner = std::make_unique<RemoteQuestioner>(transports.get(binding.questioner_endpoint));
    }
    if (binding.combiner_endpoint.empty()) {
        combiner = std::make_unique<TemplateCombiner>();
    } else {
        combiner = std::make_unique<RemoteCombiner>(transports.get(binding.combiner_endpoint));
    }

    const auto& all = scenes.scenes();
    std::vector<std::vector<ReasoningPath>> per_scene(all.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < all.size(); i = next++) {
            per_scene[i] = synthesize_scene(all[i], binding, options, *questioner, *combiner);
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(options.parallelism < 1 ? 1 : options.parallelism, 1,
                                                          std::max<std::size_t>(all.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    std::vector<ReasoningPath> out;
    for (auto& v : per_scene) {
        for (auto& p : v) out.push_back(std::move(p));
    }
    return out;
}

}  // namespace reasonforge
