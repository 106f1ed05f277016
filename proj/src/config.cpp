#include "reasonforge/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "reasonforge/error.hpp"
#include "reasonforge/scene.hpp"
#include "reasonforge/text.hpp"
#include "reasonforge/wire.hpp"

namespace reasonforge {

void Config::check() const {
    if (max_chain_len < 2) throw Error::config("max_chain_len must be >= 2");
    if (max_steps < 1) throw Error::config("max_steps must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error::config("alpha must lie in (0,1]");
    if (!(delta > 0.0)) throw Error::config("delta must be > 0");
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw Error::config("min_confidence must lie in [0,1]");
    if (parallelism < 1) throw Error::config("parallelism must be >= 1");
    if (max_in_flight < 1) throw Error::config("max_in_flight must be >= 1");
    if (timeout_ms < 1) throw Error::config("timeout_ms must be >= 1");
    auto endpoint_ok = [](const std::string& e, const char* what) {
        if (!e.empty() && !is_remote_endpoint(e)) {
            throw Error::config(std::string(what) + " endpoint '" + e + "' must start with http:// or exec:");
        }
    };
    endpoint_ok(policy_endpoint, "policy");
    for (const auto& e : tool_endpoints) endpoint_ok(e, "tool");
    endpoint_ok(questioner_endpoint, "questioner");
    endpoint_ok(combiner_endpoint, "combiner");
}

namespace {

std::string unquote(const std::string& v, int lineno) {
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
        if (v.back() != v.front()) throw Error::config("line " + std::to_string(lineno) + ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    return v;
}

template <typename T>
T number(const std::string& v, int lineno) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw Error::config("line " + std::to_string(lineno) + ": '" + v + "' is not a valid number");
    }
    return out;
}

bool boolean(const std::string& v, int lineno) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error::config("line " + std::to_string(lineno) + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(Config&, const std::string&, int)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"synthesis.seed", [](Config& c, const std::string& v, int l) { c.seed = number<std::uint64_t>(v, l); }},
        {"synthesis.max_chain_len", [](Config& c, const std::string& v, int l) { c.max_chain_len = number<int>(v, l); }},
        {"synthesis.delta", [](Config& c, const std::string& v, int l) { c.delta = number<double>(v, l); }},
        {"synthesis.min_confidence",
         [](Config& c, const std::string& v, int l) { c.min_confidence = number<double>(v, l); }},
        {"reasoner.max_steps", [](Config& c, const std::string& v, int l) { c.max_steps = number<int>(v, l); }},
        {"reasoner.alpha", [](Config& c, const std::string& v, int l) { c.alpha = number<double>(v, l); }},
        {"reasoner.context_passthrough",
         [](Config& c, const std::string& v, int l) { c.context_passthrough = boolean(v, l); }},
        {"backends.policy", [](Config& c, const std::string& v, int l) { c.policy_endpoint = unquote(v, l); }},
        {"backends.grounding", [](Config& c, const std::string& v, int l) { c.tool_endpoints[0] = unquote(v, l); }},
        {"backends.highlight", [](Config& c, const std::string& v, int l) { c.tool_endpoints[1] = unquote(v, l); }},
        {"backends.ocr", [](Config& c, const std::string& v, int l) { c.tool_endpoints[2] = unquote(v, l); }},
        {"backends.answer", [](Config& c, const std::string& v, int l) { c.tool_endpoints[3] = unquote(v, l); }},
        {"backends.questioner", [](Config& c, const std::string& v, int l) { c.questioner_endpoint = unquote(v, l); }},
        {"backends.combiner", [](Config& c, const std::string& v, int l) { c.combiner_endpoint = unquote(v, l); }},
        {"backends.max_in_flight", [](Config& c, const std::string& v, int l) { c.max_in_flight = number<int>(v, l); }},
        {"backends.timeout_ms", [](Config& c, const std::string& v, int l) { c.timeout_ms = number<int>(v, l); }},
        {"run.parallelism", [](Config& c, const std::string& v, int l) { c.parallelism = number<int>(v, l); }},
    };
    return table;
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == quote) in_string = false;
        } else if (c == '"' || c == '\'') {
            in_string = true;
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

}  // namespace

Config parse_config(std::string_view text, Config base) {
    std::istringstream in{std::string(text)};
    std::string raw, section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = text::trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error::config("line " + std::to_string(lineno) + ": malformed section");
            section = text::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw Error::config("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = text::trim(line.substr(0, eq));
        const std::string value = text::trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        const auto it = setters().find(full);
        if (it == setters().end()) throw Error::config("line " + std::to_string(lineno) + ": unknown key '" + full + "'");
        it->second(base, value, lineno);
    }
    return base;
}

Config load_config(const std::string& path, Config base) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error::config("cannot read config " + path);
    }
    return parse_config(text, base);
}

}  // namespace reasonforge
