#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "chatml.hpp"
#include "common.hpp"

namespace pv {

namespace fs = std::filesystem;

// ==== normalization ====

namespace {

// canonical form for tokens that are pure decimal numbers, else nullopt
std::optional<std::string> canonical_number(const std::string & tok) {
    size_t i = 0;
    bool neg = false;
    if (i < tok.size() && (tok[i] == '+' || tok[i] == '-')) {
        neg = tok[i] == '-';
        i++;
    }
    std::string int_part;
    std::string frac_part;
    bool saw_digit = false;
    bool saw_dot = false;
    for (; i < tok.size(); i++) {
        char c = tok[i];
        if (c == '.') {
            if (saw_dot) {
                return std::nullopt;
            }
            saw_dot = true;
        } else if (c >= '0' && c <= '9') {
            saw_digit = true;
            (saw_dot ? frac_part : int_part) += c;
        } else {
            return std::nullopt;
        }
    }
    if (!saw_digit) {
        return std::nullopt;
    }
    size_t nz = 0;
    while (nz + 1 < int_part.size() && int_part[nz] == '0') {
        nz++;
    }
    int_part = int_part.substr(nz);
    if (int_part.empty()) {
        int_part = "0";
    }
    while (!frac_part.empty() && frac_part.back() == '0') {
        frac_part.pop_back();
    }
    std::string out = int_part;
    if (!frac_part.empty()) {
        out += "." + frac_part;
    }
    if (neg && out != "0") {
        out = "-" + out;
    }
    return out;
}

}  // namespace

std::string normalize_answer(const std::string & text) {
    std::string s = to_lower(trim(text));
    while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' ||
                          s.back() == ':' || s.back() == '!' || s.back() == '?')) {
        s.pop_back();
        s = trim(s);
    }
    std::vector<std::string> tokens = split_whitespace(s);
    for (std::string & tok : tokens) {
        if (auto num = canonical_number(tok)) {
            tok = *num;
        }
    }
    return join(tokens, " ");
}

bool fast_answer_match(const std::string & response, const std::string & answer_key,
                       const std::vector<std::string> & alternates) {
    std::vector<std::string> candidates;
    candidates.push_back(normalize_answer(response));
    size_t eq = response.rfind('=');
    if (eq != std::string::npos) {
        candidates.push_back(normalize_answer(response.substr(eq + 1)));
    }

    std::vector<std::string> targets;
    targets.push_back(normalize_answer(answer_key));
    for (const std::string & alt : alternates) {
        targets.push_back(normalize_answer(alt));
    }

    for (const std::string & c : candidates) {
        if (c.empty()) {
            continue;
        }
        for (const std::string & t : targets) {
            if (!t.empty() && c == t) {
                return true;
            }
        }
    }
    return false;
}

// ==== answer-check adjudication ====

static const char * ANSWER_CHECK_HEADER =
    "I am grading solutions to a trivia question.  Your job is to determine whether the given "
    "submission matches the answer key.";

static const char * ANSWER_CHECK_INSTRUCTIONS =
    R"(## Instructions

You job is **NOT to solve the question**.  Your job is to determine whether the given submission should be graded as correct *without needing a protest*.  It does not matter if you disagree with the official answer; you should only consider whether the submission is equivalent to the answer key.  (There is a separate process for protests.)

Give a freeform analysis comparing the submission to the answer key.  You should then output a JSON dictionary in the following form:

```json
    { 
       "matches_key": [Answer 'True', 'False', or 'Uncertain'],
    }
```)";

std::string render_answer_check_prompt(const std::string & question, const std::string & response,
                                       const std::string & answer_key,
                                       const std::vector<std::string> & alternates) {
    std::string out = ANSWER_CHECK_HEADER;
    out += "\n\n## Original question\n\n";
    out += question;
    out += "\n\n## Submission\n\n";
    out += response;
    out += "\n\n## Answer key\n\n";
    out += answer_key;
    out += "\n";
    if (!alternates.empty()) {
        out += "\n### Alternative Answer Forms\n\n";
        for (const std::string & alt : alternates) {
            out += alt;
            out += "\n";
        }
    }
    out += "\n";
    out += ANSWER_CHECK_INSTRUCTIONS;
    return out;
}

std::optional<std::string> extract_json_block(const std::string & text) {
    size_t fence = text.find("```json");
    if (fence != std::string::npos) {
        size_t body = fence + 7;
        size_t close = text.find("```", body);
        if (close != std::string::npos) {
            return trim(text.substr(body, close - body));
        }
    }
    size_t open = text.find('{');
    if (open == std::string::npos) {
        return std::nullopt;
    }
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < text.size(); i++) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                i++;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            depth++;
        } else if (c == '}') {
            depth--;
            if (depth == 0) {
                return text.substr(open, i - open + 1);
            }
        }
    }
    return std::nullopt;
}

oracle_verdict check_answer(const std::string & question, const std::string & response,
                            const std::string & answer_key,
                            const std::vector<std::string> & alternates, provider * judge,
                            int retries) {
    if (answer_key.empty()) {
        throw validation_error("check_answer: empty answer key");
    }
    if (fast_answer_match(response, answer_key, alternates)) {
        return {verdict::correct, "normalized match"};
    }
    if (judge == nullptr) {
        return {verdict::incorrect, "no judge configured; normalized mismatch"};
    }

    completion_request req;
    req.context =
        render_prompt_context(render_answer_check_prompt(question, response, answer_key, alternates));
    req.n = 1;
    req.temperature = 0.0;
    req.max_tokens = 1024;
    req.want_logprobs = false;

    std::string last_failure;
    for (int attempt = 0; attempt <= retries; attempt++) {
        std::string reply = judge->sample_completions(req)[0].text();
        std::optional<std::string> block = extract_json_block(reply);
        if (!block) {
            last_failure = "no JSON block in judge reply: " + reply;
            continue;
        }
        json j = json::parse(*block, nullptr, false);
        if (j.is_discarded() || !j.contains("matches_key")) {
            last_failure = "judge JSON lacks matches_key: " + reply;
            continue;
        }
        const json & v = j["matches_key"];
        std::string value;
        if (v.is_boolean()) {
            value = v.get<bool>() ? "true" : "false";
        } else if (v.is_string()) {
            value = to_lower(trim(v.get<std::string>()));
        } else {
            last_failure = "matches_key is neither string nor bool: " + reply;
            continue;
        }
        if (value == "true") {
            return {verdict::correct, "judge: matches_key=True"};
        }
        if (value == "false") {
            return {verdict::incorrect, "judge: matches_key=False"};
        }
        if (value == "uncertain") {
            return {verdict::uncertain, "judge: matches_key=Uncertain"};
        }
        last_failure = "matches_key value '" + value + "' not recognized: " + reply;
    }
    throw adjudication_error("check_answer: judge reply unusable after " +
                             std::to_string(retries + 1) + " attempts; " + last_failure);
}

oracle_verdict run_code_tests(const std::string & candidate, const std::vector<code_test> & suite,
                              const sandbox_limits & limits) {
    sandbox_outcome outcome = run_python_tests(candidate, suite, limits);
    if (outcome.passed) {
        return {verdict::correct, "all " + std::to_string(suite.size()) + " tests passed"};
    }
    return {verdict::incorrect, outcome.detail};
}

// ==== plurality filtering ====

equivalence_fn normalized_equivalence() {
    return [](const std::string & a, const std::string & b) {
        return normalize_answer(a) == normalize_answer(b);
    };
}

equivalence_fn judge_equivalence(const std::string & question, provider * judge, int retries) {
    return [question, judge, retries](const std::string & a, const std::string & b) {
        return check_answer(question, a, b, {}, judge, retries).outcome == verdict::correct;
    };
}

std::pair<std::string, int> plurality_vote(const std::vector<std::string> & answers,
                                           const equivalence_fn & equivalent) {
    if (answers.empty()) {
        throw validation_error("plurality_vote: no answers");
    }
    std::vector<std::pair<std::string, int>> classes;  // representative, size
    for (const std::string & a : answers) {
        bool placed = false;
        for (auto & [rep, count] : classes) {
            if (equivalent(rep, a)) {
                count++;
                placed = true;
                break;
            }
        }
        if (!placed) {
            classes.emplace_back(a, 1);
        }
    }
    const std::pair<std::string, int> * best = &classes[0];
    for (const auto & cls : classes) {
        if (cls.second > best->second) {
            best = &cls;
        }
    }
    return *best;
}

const char * filter_decision_name(filter_decision d) {
    switch (d) {
        case filter_decision::keep:                 return "keep";
        case filter_decision::discard_too_easy:     return "discard_too_easy";
        case filter_decision::discard_inconsistent: return "discard_inconsistent";
    }
    return "keep";
}

question_bundle filter_question(const std::string & question,
                                const std::vector<std::string> & answers,
                                const equivalence_fn & equivalent) {
    if (answers.size() < 2) {
        throw validation_error("filter_question: needs k >= 2 answers");
    }
    question_bundle bundle;
    bundle.question = question;
    bundle.answers = answers;
    auto [rep, count] = plurality_vote(answers, equivalent);
    bundle.plurality_answer = rep;
    bundle.plurality_count = count;
    if (count == (int) answers.size()) {
        bundle.decision = filter_decision::discard_too_easy;
    } else if (count == 1) {
        bundle.decision = filter_decision::discard_inconsistent;
    } else {
        bundle.decision = filter_decision::keep;
    }
    return bundle;
}

// ==== oracle bindings ====

void oracle_binding::validate() const {
    if (type != "answer_key" && type != "code_tests" && type != "fixed_rate") {
        throw validation_error("oracle binding: unknown type '" + type + "'");
    }
    if (extract != "full" && extract != "final_line" && extract != "final_token" &&
        extract != "boxed") {
        throw validation_error("oracle binding: unknown extract mode '" + extract + "'");
    }
    if (type == "answer_key" && answer_key.empty()) {
        throw validation_error("oracle binding: answer_key type needs an answer key");
    }
    if (type == "code_tests" && tests.empty()) {
        throw validation_error("oracle binding: code_tests type needs a non-empty suite");
    }
    if (type == "fixed_rate" && (rate < 0.0 || rate > 1.0)) {
        throw validation_error("oracle binding: fixed_rate rate must be in [0, 1]");
    }
}

static std::vector<code_test> load_tests_dir(const std::string & dir, const std::string & where) {
    if (!fs::is_directory(dir)) {
        throw infra_error(where + ": tests_dir is not a directory: " + dir);
    }
    std::vector<std::string> stems;
    for (const auto & entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (ends_with(name, ".in")) {
            stems.push_back(name.substr(0, name.size() - 3));
        }
    }
    std::sort(stems.begin(), stems.end());
    std::vector<code_test> tests;
    for (const std::string & stem : stems) {
        code_test t;
        t.input = read_file(dir + "/" + stem + ".in");
        t.expected = read_file(dir + "/" + stem + ".out");
        tests.push_back(std::move(t));
    }
    if (tests.empty()) {
        throw validation_error(where + ": tests_dir has no .in/.out pairs: " + dir);
    }
    return tests;
}

oracle_binding binding_from_json(const json & j, const std::string & where) {
    oracle_binding b;
    b.type = get_string(j, "type", where);
    if (j.contains("answer_key")) {
        b.answer_key = get_string(j, "answer_key", where);
    }
    if (j.contains("alternates")) {
        if (!j["alternates"].is_array()) {
            throw parse_error(where + ": alternates must be an array");
        }
        for (const json & alt : j["alternates"]) {
            if (!alt.is_string()) {
                throw parse_error(where + ": alternates must be strings");
            }
            b.alternates.push_back(alt.get<std::string>());
        }
    }
    if (j.contains("extract")) {
        b.extract = get_string(j, "extract", where);
    }
    if (j.contains("tests")) {
        if (!j["tests"].is_array()) {
            throw parse_error(where + ": tests must be an array");
        }
        for (const json & t : j["tests"]) {
            b.tests.push_back({get_string(t, "input", where), get_string(t, "expected", where)});
        }
    }
    if (j.contains("tests_dir")) {
        std::vector<code_test> loaded = load_tests_dir(get_string(j, "tests_dir", where), where);
        b.tests.insert(b.tests.end(), loaded.begin(), loaded.end());
    }
    if (j.contains("rate")) {
        b.rate = get_number(j, "rate", where);
    }
    b.validate();
    return b;
}

json binding_to_json(const oracle_binding & b) {
    json j;
    j["type"] = b.type;
    if (!b.answer_key.empty()) {
        j["answer_key"] = b.answer_key;
    }
    if (!b.alternates.empty()) {
        j["alternates"] = b.alternates;
    }
    if (b.extract != "full") {
        j["extract"] = b.extract;
    }
    if (!b.tests.empty()) {
        json tests = json::array();
        for (const code_test & t : b.tests) {
            tests.push_back(json{{"input", t.input}, {"expected", t.expected}});
        }
        j["tests"] = tests;
    }
    if (b.type == "fixed_rate") {
        j["rate"] = b.rate;
    }
    return j;
}

std::string extract_answer_text(const token_seq & response, const std::string & mode) {
    if (mode == "final_token") {
        return response.empty() ? std::string() : response.tokens.back().text;
    }
    std::string text = response.text();
    if (mode == "full") {
        return text;
    }
    if (mode == "final_line") {
        std::vector<std::string> lines = split(text, '\n');
        for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
            std::string line = trim(*it);
            if (!line.empty()) {
                return line;
            }
        }
        return "";
    }
    if (mode == "boxed") {
        size_t pos = text.rfind("\\boxed{");
        if (pos == std::string::npos) {
            return "";
        }
        size_t i = pos + 7;
        int depth = 1;
        std::string inside;
        for (; i < text.size() && depth > 0; i++) {
            if (text[i] == '{') {
                depth++;
            } else if (text[i] == '}') {
                depth--;
                if (depth == 0) {
                    break;
                }
            }
            if (depth > 0) {
                inside += text[i];
            }
        }
        return inside;
    }
    throw validation_error("extract_answer_text: unknown mode '" + mode + "'");
}

rollout_scorer make_scorer(const oracle_binding & binding, const std::string & question,
                           provider * judge, const oracle_settings & settings) {
    binding.validate();
    if (binding.type == "answer_key") {
        return [binding, question, judge, retries = settings.judge_retries](
                   const token_seq & response, int) {
            std::string answer = extract_answer_text(response, binding.extract);
            oracle_verdict v = check_answer(question, answer, binding.answer_key,
                                            binding.alternates, judge, retries);
            // uncertain counts as failure: adjudication noise must not mint successes
            return v.outcome == verdict::correct;
        };
    }
    if (binding.type == "code_tests") {
        sandbox_limits limits{settings.sandbox_time_s, settings.sandbox_memory_mb};
        return [tests = binding.tests, limits](const token_seq & response, int) {
            return run_code_tests(response.text(), tests, limits).outcome == verdict::correct;
        };
    }
    // fixed_rate: exactly floor(n * rate) successes in every n-rollout batch
    return [rate = binding.rate](const token_seq &, int index) {
        double before = std::floor(rate * index + 1e-9);
        double after = std::floor(rate * (index + 1) + 1e-9);
        return after > before;
    };
}

}  // namespace pv
