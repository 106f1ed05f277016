#pragma once

// The small question grammar shared by the template generators, the oracle
// answerer and the validators.
//
//   Where is|are NP?           (graphical sub-questions)
//   How many PLURAL are there[ REL REF]?
//   What color is NP?
//   What is the text on NP?
//
// NP := REF (REL REF)*, REL := on | in | near, REF := "the ..." phrase.

#include <string>
#include <string_view>
#include <vector>

namespace reasonforge {

enum class QuestionForm { Where, Count, Color, Text, Unknown };

const char* to_string(QuestionForm form);

struct ParsedQuestion {
    QuestionForm form = QuestionForm::Unknown;
    std::string np;  // noun phrase with the original casing, "are there" removed for counts
};

ParsedQuestion parse_question(std::string_view question);

struct NounChain {
    std::vector<std::string> refs;  // refs.size() == rels.size() + 1
    std::vector<std::string> rels;
};

NounChain split_noun_phrase(std::string_view np);

/// Inverse of split_noun_phrase.
std::string join_noun_chain(const NounChain& chain);

/// Renders a question of `form` around a noun phrase; Count expects
/// np = "PLURAL[ REL REF]".
std::string render_question(QuestionForm form, std::string_view np, bool plural_where = false);

/// True for "it", "this", "that" style referents.
bool is_pronoun_ref(std::string_view ref);

}  // namespace reasonforge
