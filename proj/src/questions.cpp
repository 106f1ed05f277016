#include "reasonforge/questions.hpp"

#include <array>

#include "reasonforge/text.hpp"

namespace reasonforge {

const char* to_string(QuestionForm form) {
    switch (form) {
        case QuestionForm::Where: return "where";
        case QuestionForm::Count: return "count";
        case QuestionForm::Color: return "color";
        case QuestionForm::Text: return "text";
        case QuestionForm::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

constexpr std::array<std::string_view, 3> kRelations{"on", "in", "near"};

std::string strip_question_mark(std::string_view q) {
    std::string s = text::trim(q);
    while (!s.empty() && (s.back() == '?' || s.back() == '.')) s.pop_back();
    return text::trim(s);
}

}  // namespace

ParsedQuestion parse_question(std::string_view question) {
    const std::string body = strip_question_mark(question);
    const std::string low = text::lower(body);
    struct Prefix {
        std::string_view text;
        QuestionForm form;
    };
    static constexpr std::array<Prefix, 7> kPrefixes{{
        {"where is ", QuestionForm::Where},
        {"where are ", QuestionForm::Where},
        {"how many ", QuestionForm::Count},
        {"what color is ", QuestionForm::Color},
        {"what colour is ", QuestionForm::Color},
        {"what is the text on ", QuestionForm::Text},
        {"what is written on ", QuestionForm::Text},
    }};
    for (const auto& p : kPrefixes) {
        if (!text::starts_with(low, p.text)) continue;
        ParsedQuestion out{p.form, body.substr(p.text.size())};
        if (p.form == QuestionForm::Count) {
            const std::string lnp = text::lower(out.np);
            const std::size_t at = lnp.find(" are there");
            if (at != std::string::npos) out.np = out.np.substr(0, at) + out.np.substr(at + 10);
        }
        return out;
    }
    return {};
}

NounChain split_noun_phrase(std::string_view np) {
    NounChain chain;
    const std::string s(np);
    const std::string low = text::lower(s);
    std::size_t start = 0;
    std::size_t pos = 0;
    while (pos < low.size()) {
        std::size_t best = std::string::npos;
        std::string_view best_rel;
        for (auto rel : kRelations) {
            const std::string needle = " " + std::string(rel) + " the ";
            const std::size_t at = low.find(needle, pos);
            if (at != std::string::npos && at < best) {
                best = at;
                best_rel = rel;
            }
        }
        if (best == std::string::npos) break;
        chain.refs.push_back(s.substr(start, best - start));
        chain.rels.emplace_back(best_rel);
        start = best + best_rel.size() + 2;  // skip " rel ", keep "the "
        pos = start;
    }
    chain.refs.push_back(s.substr(start));
    return chain;
}

std::string join_noun_chain(const NounChain& chain) {
    std::string out = chain.refs.empty() ? "" : chain.refs[0];
    for (std::size_t i = 0; i < chain.rels.size() && i + 1 < chain.refs.size(); ++i) {
        out += " " + chain.rels[i] + " " + chain.refs[i + 1];
    }
    return out;
}

std::string render_question(QuestionForm form, std::string_view np, bool plural_where) {
    const std::string n(np);
    switch (form) {
        case QuestionForm::Where: return (plural_where ? "Where are " : "Where is ") + n + "?";
        case QuestionForm::Count: {
            const NounChain c = split_noun_phrase(n);
            std::string q = "How many " + c.refs[0] + " are there";
            for (std::size_t i = 0; i < c.rels.size(); ++i) q += " " + c.rels[i] + " " + c.refs[i + 1];
            return q + "?";
        }
        case QuestionForm::Color: return "What color is " + n + "?";
        case QuestionForm::Text: return "What is the text on " + n + "?";
        case QuestionForm::Unknown: break;
    }
    return n;
}

bool is_pronoun_ref(std::string_view ref) {
    const auto toks = text::tokens(ref);
    bool any = false;
    for (const auto& t : toks) {
        if (t == "the" || t == "a" || t == "an") continue;
        if (t != "it" && t != "this" && t != "that" && t != "one") return false;
        any = true;
    }
    return any || toks.empty();
}

}  // namespace reasonforge
