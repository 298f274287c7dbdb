// Correctness deciders: normalized answer-key matching with judge
// escalation, sandboxed code tests, plurality voting over sampled answers,
// and the agreement-based question filter.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "jsonl.hpp"
#include "provider.hpp"
#include "sandbox.hpp"

namespace pv {

enum class verdict {
    correct,
    incorrect,
    uncertain,
};

struct oracle_verdict {
    verdict outcome = verdict::uncertain;
    std::string rationale;
};

// Canonical answer surface: trimmed, casefolded, inner whitespace
// collapsed, trailing punctuation stripped, decimal numbers canonicalized
// ("42." == "42.0" == "42").
std::string normalize_answer(const std::string & text);

// Normalized equality against the key or any alternate. Also accepts a
// response whose text after its last '=' matches, so "t = 23" matches key
// "23".
bool fast_answer_match(const std::string & response, const std::string & answer_key,
                       const std::vector<std::string> & alternates);

// Appendix-format adjudication prompt asking whether response matches the
// key, with an alternates section when any are given.
std::string render_answer_check_prompt(const std::string & question, const std::string & response,
                                       const std::string & answer_key,
                                       const std::vector<std::string> & alternates);

// First JSON object embedded in a reply: a ```json fence when present,
// otherwise the first balanced {...} span.
std::optional<std::string> extract_json_block(const std::string & text);

// Fast path first; unresolved responses go to the judge provider when one
// is given (matches_key True/False/Uncertain), and are incorrect when no
// judge is configured. Unusable judge replies raise adjudication_error
// after `retries` additional attempts.
oracle_verdict check_answer(const std::string & question, const std::string & response,
                            const std::string & answer_key,
                            const std::vector<std::string> & alternates,
                            provider * judge = nullptr, int retries = 0);

// Test-suite oracle: correct iff every test passes in the sandbox.
oracle_verdict run_code_tests(const std::string & candidate, const std::vector<code_test> & suite,
                              const sandbox_limits & limits);

// ==== plurality filtering ====

using equivalence_fn = std::function<bool(const std::string &, const std::string &)>;

equivalence_fn normalized_equivalence();
// answers are equivalent when check_answer(question, a, key=b) says correct
equivalence_fn judge_equivalence(const std::string & question, provider * judge, int retries);

// Largest equivalence class: returns (representative, class size). Classes
// form greedily in sampled order against each class representative; ties
// go to the earliest-formed class.
std::pair<std::string, int> plurality_vote(const std::vector<std::string> & answers,
                                           const equivalence_fn & equivalent);

enum class filter_decision {
    keep,
    discard_too_easy,
    discard_inconsistent,
};

struct question_bundle {
    std::string question;
    std::vector<std::string> answers;
    std::string plurality_answer;
    int plurality_count = 0;
    filter_decision decision = filter_decision::keep;
};

const char * filter_decision_name(filter_decision d);

// k-answer agreement rule: all k equivalent -> too easy; all distinct ->
// inconsistent; anything between is kept with the plurality answer as
// pseudo-ground-truth.
question_bundle filter_question(const std::string & question,
                                const std::vector<std::string> & answers,
                                const equivalence_fn & equivalent);

// ==== oracle bindings for queries ====

struct oracle_binding {
    std::string type;  // answer_key | code_tests | fixed_rate
    std::string answer_key;
    std::vector<std::string> alternates;
    std::string extract = "full";  // full | final_line | final_token | boxed
    std::vector<code_test> tests;
    double rate = 0.0;  // fixed_rate only

    void validate() const;
};

oracle_binding binding_from_json(const json & j, const std::string & where);
json binding_to_json(const oracle_binding & b);

// Response part a binding's matcher sees, per its extract mode.
std::string extract_answer_text(const token_seq & response, const std::string & mode);

// Success predicate over one rollout: the completed response plus its
// index within the estimate (fixed_rate oracles key off the index).
using rollout_scorer = std::function<bool(const token_seq & full_response, int rollout_index)>;

rollout_scorer make_scorer(const oracle_binding & binding, const std::string & question,
                           provider * judge, const oracle_settings & settings);

}  // namespace pv
