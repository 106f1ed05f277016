#include "reasonforge/text.hpp"

#include <cctype>

namespace reasonforge::text {

std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool label_in(std::string_view label, const std::vector<std::string>& phrase_tokens) {
    const auto lt = tokens(label);
    if (lt.empty() || lt.size() > phrase_tokens.size()) return false;
    for (std::size_t i = 0; i + lt.size() <= phrase_tokens.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < lt.size() && ok; ++k) {
            const std::string& p = phrase_tokens[i + k];
            if (k + 1 < lt.size()) {
                ok = p == lt[k];
            } else {
                ok = p == lt[k] || p == lt[k] + "s" || p == lt[k] + "es";
            }
        }
        if (ok) return true;
    }
    return false;
}

std::string plural(std::string_view noun) {
    std::string n(noun);
    auto ends = [&](std::string_view suf) {
        return n.size() >= suf.size() && n.compare(n.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends("s") || ends("x") || ends("ch") || ends("sh")) return n + "es";
    return n + "s";
}

}  // namespace reasonforge::text
