#include "evalmetrics.hpp"

#include <cmath>

#include "chatml.hpp"
#include "common.hpp"

namespace pv {

double f1_score(uint64_t n_correct, uint64_t n_incorrect, uint64_t n_refused) {
    uint64_t total = n_correct + n_incorrect + n_refused;
    if (total == 0) {
        throw validation_error("f1_score: needs at least one response");
    }
    uint64_t attempted = n_correct + n_incorrect;
    double precision = attempted == 0 ? 0.0 : (double) n_correct / (double) attempted;
    double recall = (double) n_correct / (double) total;
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

const char * const AMC_PROMPT_TEMPLATE =
    "The following question is from a 25-question, multiple choice test. Each question is "
    "followed by answers marked A, B, C, D, and E.  Only one of these is correct.\n"
    "\n"
    "SCORING: You will receive 6 points for each correct answer, 1.5 points for each problem "
    "left unanswered, and 0 points for each incorrect answer.\n"
    "\n"
    "Solve the question step by step, then answer \\boxed{A}, \\boxed{B}, \\boxed{C}, "
    "\\boxed{D}, \\boxed{E}, or \\boxed{blank}.\n"
    "\n"
    "# Question\n"
    "{{question}}\n"
    "(A) {{option_a}}\n"
    "(B) {{option_b}}\n"
    "(C) {{option_c}}\n"
    "(D) {{option_d}}\n"
    "(E) {{option_e}}";

std::string render_amc_prompt(const std::string & question,
                              const std::array<std::string, 5> & options) {
    std::string out = AMC_PROMPT_TEMPLATE;
    out = replace_all(out, "{{question}}", question);
    out = replace_all(out, "{{option_a}}", options[0]);
    out = replace_all(out, "{{option_b}}", options[1]);
    out = replace_all(out, "{{option_c}}", options[2]);
    out = replace_all(out, "{{option_d}}", options[3]);
    out = replace_all(out, "{{option_e}}", options[4]);
    return out;
}

static bool is_letter_choice(const std::string & c) {
    return c == "A" || c == "B" || c == "C" || c == "D" || c == "E";
}

double amc_score(const std::vector<std::string> & choices, const std::vector<std::string> & key) {
    if (choices.size() != 25 || key.size() != 25) {
        throw validation_error("amc_score: needs exactly 25 choices and 25 key entries");
    }
    double score = 0.0;
    for (size_t i = 0; i < 25; i++) {
        if (!is_letter_choice(key[i])) {
            throw validation_error("amc_score: key entry " + std::to_string(i + 1) +
                                   " must be A..E, got '" + key[i] + "'");
        }
        if (choices[i] == "blank") {
            score += 1.5;
        } else if (is_letter_choice(choices[i])) {
            if (choices[i] == key[i]) {
                score += 6.0;
            }
        } else {
            throw validation_error("amc_score: choice " + std::to_string(i + 1) +
                                   " must be A..E or blank, got '" + choices[i] + "'");
        }
    }
    return score;
}

std::optional<std::string> parse_boxed_choice(const std::string & solution) {
    size_t pos = solution.rfind("\\boxed{");
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    size_t i = pos + 7;
    int depth = 1;
    std::string inside;
    for (; i < solution.size(); i++) {
        if (solution[i] == '{') {
            depth++;
        } else if (solution[i] == '}') {
            depth--;
            if (depth == 0) {
                break;
            }
        }
        inside += solution[i];
    }
    std::string content = trim(inside);
    if (is_letter_choice(content) || content == "blank") {
        return content;
    }
    return std::nullopt;
}

static std::optional<std::string> parse_judge_choice(const std::string & reply) {
    if (auto boxed = parse_boxed_choice(reply)) {
        return boxed;
    }
    std::vector<std::string> words = split_whitespace(reply);
    if (words.empty()) {
        return std::nullopt;
    }
    std::string first = words[0];
    while (!first.empty() && (first.back() == '.' || first.back() == ',')) {
        first.pop_back();
    }
    if (first.size() == 1 && first[0] >= 'a' && first[0] <= 'e') {
        first[0] = (char) (first[0] - 'a' + 'A');
    }
    if (is_letter_choice(first)) {
        return first;
    }
    if (to_lower(first) == "blank" || to_lower(first) == "none") {
        return std::string("blank");
    }
    return std::nullopt;
}

static std::string render_choice_extraction_prompt(const std::string & solution,
                                                   const std::vector<std::string> & options) {
    std::string out =
        "Extract the final answer choice from the following solution to a multiple-choice "
        "question.\n\n# Solution\n";
    out += solution;
    if (options.size() == 5) {
        out += "\n\n# Options\n";
        const char * letters = "ABCDE";
        for (size_t i = 0; i < 5; i++) {
            out += "(";
            out += letters[i];
            out += ") " + options[i] + "\n";
        }
        out.pop_back();
    }
    out +=
        "\n\n# Instructions\nReply with exactly one of A, B, C, D, E, or blank. Choose the "
        "letter whose option matches the solution's final answer, even when the solution boxes "
        "a numerical expression instead of a letter. Reply blank when the solution gives no "
        "final answer.";
    return out;
}

choice_extraction extract_choice(const std::string & solution, provider * judge,
                                 const std::vector<std::string> & options, int retries) {
    choice_extraction result;
    if (auto boxed = parse_boxed_choice(solution)) {
        result.choice = *boxed;
        return result;
    }
    if (judge == nullptr) {
        result.choice = "blank";
        return result;
    }

    completion_request req;
    req.context = render_prompt_context(render_choice_extraction_prompt(solution, options));
    req.n = 1;
    req.temperature = 1.0;
    req.max_tokens = 64;
    req.want_logprobs = false;

    result.used_judge = true;
    std::string last_reply;
    for (int attempt = 0; attempt <= retries; attempt++) {
        try {
            last_reply = judge->sample_completions(req)[0].text();
        } catch (const error & e) {
            result.choice = "blank";
            result.warning = std::string("choice extraction judge failed: ") + e.what();
            return result;
        }
        if (auto choice = parse_judge_choice(last_reply)) {
            result.choice = *choice;
            return result;
        }
    }
    result.choice = "blank";
    result.warning = "choice extraction judge reply unusable: " + last_reply;
    return result;
}

mixture_plan mixture_plan_from_json(const json & j, const std::string & where) {
    mixture_plan plan;
    plan.horizon_tokens = get_number(j, "horizon_tokens", where);
    if (!j.contains("sources") || !j["sources"].is_array()) {
        throw parse_error(where + ": mixture plan needs a sources array");
    }
    for (const json & s : j["sources"]) {
        mixture_source source;
        source.name = get_string(s, "name", where);
        source.fraction = get_number(s, "fraction", where);
        source.unique_tokens = get_number(s, "unique_tokens", where);
        plan.sources.push_back(std::move(source));
    }
    return plan;
}

std::vector<std::pair<std::string, double>> mixture_epochs(const mixture_plan & plan) {
    if (plan.horizon_tokens <= 0.0) {
        throw validation_error("mixture plan: horizon_tokens must be > 0");
    }
    double fraction_sum = 0.0;
    for (const mixture_source & s : plan.sources) {
        if (s.fraction < 0.0 || s.fraction > 1.0) {
            throw validation_error("mixture plan: fraction for '" + s.name +
                                   "' must be in [0, 1]");
        }
        if (s.unique_tokens <= 0.0) {
            throw validation_error("mixture plan: unique_tokens for '" + s.name +
                                   "' must be > 0");
        }
        fraction_sum += s.fraction;
    }
    if (std::fabs(fraction_sum - 1.0) > 1e-6) {
        throw validation_error("mixture plan: fractions must sum to 1");
    }
    std::vector<std::pair<std::string, double>> epochs;
    for (const mixture_source & s : plan.sources) {
        epochs.emplace_back(s.name, s.fraction * plan.horizon_tokens / s.unique_tokens);
    }
    return epochs;
}

}  // namespace pv
