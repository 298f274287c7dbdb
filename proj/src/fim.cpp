#include "fim.hpp"

#include "chatml.hpp"
#include "common.hpp"

namespace pv {

const char * const FIM_HOLE_MARKER = "<<THIS PART DELETED>>";

// ==== span carving ====

namespace {

struct doc_line {
    size_t begin = 0;        // offset of first byte
    size_t content_end = 0;  // offset one past the last byte before the newline
    size_t end = 0;          // offset one past the newline (or content_end at EOF)
    size_t indent = 0;       // leading whitespace bytes
    bool blank = true;
};

std::vector<doc_line> scan_lines(const std::string & document) {
    std::vector<doc_line> lines;
    size_t pos = 0;
    while (pos < document.size()) {
        doc_line line;
        line.begin = pos;
        size_t nl = document.find('\n', pos);
        line.content_end = nl == std::string::npos ? document.size() : nl;
        line.end = nl == std::string::npos ? document.size() : nl + 1;
        for (size_t i = line.begin; i < line.content_end; i++) {
            if (document[i] == ' ' || document[i] == '\t') {
                line.indent++;
            } else {
                line.blank = false;
                break;
            }
        }
        lines.push_back(line);
        pos = line.end;
    }
    return lines;
}

struct byte_span {
    size_t begin = 0;
    size_t end = 0;
};

// spans of 2..8 indented lines that stay inside one indentation-0 block;
// the first line's indentation and the final newline stay in the contexts
std::vector<byte_span> code_candidates(const std::string & document, const fim_settings & cfg) {
    std::vector<doc_line> lines = scan_lines(document);
    std::vector<byte_span> spans;
    size_t run_start = 0;
    size_t i = 0;
    auto eligible = [&](size_t k) { return !lines[k].blank && lines[k].indent >= 1; };
    while (i < lines.size()) {
        if (!eligible(i)) {
            i++;
            continue;
        }
        run_start = i;
        while (i < lines.size() && eligible(i)) {
            i++;
        }
        size_t run_end = i;  // one past
        for (size_t start = run_start; start < run_end; start++) {
            if (start == 0) {
                continue;  // a preceding line must survive as context
            }
            for (size_t len = cfg.min_lines; len <= (size_t) cfg.max_lines; len++) {
                size_t last = start + len - 1;
                if (last >= run_end || last + 1 >= lines.size()) {
                    break;  // a following line must survive as context
                }
                spans.push_back(
                    {lines[start].begin + lines[start].indent, lines[last].content_end});
            }
        }
    }
    return spans;
}

// sentence units: text through closing punctuation, trailing whitespace attached
std::vector<byte_span> sentence_units(const std::string & document) {
    std::vector<byte_span> units;
    size_t begin = 0;
    size_t i = 0;
    auto is_close = [](char c) { return c == '.' || c == '!' || c == '?'; };
    while (i < document.size()) {
        if (is_close(document[i])) {
            while (i < document.size() && is_close(document[i])) {
                i++;
            }
            size_t content_end = i;
            while (i < document.size() && (document[i] == ' ' || document[i] == '\n' ||
                                           document[i] == '\t' || document[i] == '\r')) {
                i++;
            }
            units.push_back({begin, content_end});  // end excludes trailing whitespace
            begin = i;
        } else {
            i++;
        }
    }
    if (begin < document.size()) {
        units.push_back({begin, document.size()});
    }
    return units;
}

std::vector<byte_span> prose_candidates(const std::string & document, const fim_settings & cfg) {
    std::vector<byte_span> units = sentence_units(document);
    std::vector<byte_span> spans;
    for (size_t start = 1; start < units.size(); start++) {
        for (size_t len = cfg.min_lines; len <= (size_t) cfg.max_lines; len++) {
            size_t last = start + len - 1;
            if (last + 1 >= units.size()) {
                break;
            }
            spans.push_back({units[start].begin, units[last].end});
        }
    }
    return spans;
}

}  // namespace

std::optional<fim_exercise> carve_exercise(const std::string & document,
                                           const std::string & source_id,
                                           const fim_settings & cfg, uint64_t seed) {
    std::vector<byte_span> candidates = cfg.policy == "prose" ? prose_candidates(document, cfg)
                                                              : code_candidates(document, cfg);
    if (candidates.empty()) {
        return std::nullopt;
    }
    auto engine = make_engine(mix_seed(seed, fnv1a64(source_id)), 0);
    const byte_span & span = candidates[next_below(engine, candidates.size())];

    fim_exercise exercise;
    exercise.source_id = source_id;
    exercise.policy = cfg.policy;
    exercise.context_before = document.substr(0, span.begin);
    exercise.ground_truth = document.substr(span.begin, span.end - span.begin);
    exercise.context_after = document.substr(span.end);
    if (exercise.context_before.empty() || exercise.context_after.empty() ||
        exercise.ground_truth.empty()) {
        return std::nullopt;
    }
    return exercise;
}

// ==== rendering ====

std::string render_exercise(const fim_exercise & exercise) {
    std::string excerpt_kind =
        exercise.policy == "prose" ? "Excerpt from Text" : "Excerpt from Code Snippet";
    std::string out = "**Fill-in-the-Middle Exercise**\n\n";
    out += "**Context (" + excerpt_kind + "):**\n";
    out += exercise.context_before;
    out += FIM_HOLE_MARKER;
    out += exercise.context_after;
    return out;
}

std::string render_solving_prompt(const fim_exercise & exercise) {
    std::string out = render_exercise(exercise);
    out += "\n\n**Instructions:**\n";
    out += "Reconstruct the deleted part marked ";
    out += FIM_HOLE_MARKER;
    out +=
        ". You may reason step by step first, then end with the section '**Final Guess:**' "
        "containing only your reconstruction of the deleted part.";
    return out;
}

std::string render_grading_prompt(const fim_exercise & exercise, const std::string & candidate) {
    std::string out = render_exercise(exercise);
    out += "\n\n**Correct Answer:**\n";
    out += exercise.ground_truth;
    out += "\n\n**Candidate Solution:**\n";
    out += candidate;
    out += "\n\n**Instructions:**\n";
    out += "Compare the candidate solution to the correct answer for the part marked ";
    out += FIM_HOLE_MARKER;
    out +=
        ". Briefly discuss the differences, then end with the section "
        "'**Grading and Feedback:**' containing:\n"
        "- **Grade:** <1-5, with 5 meaning equivalent to the correct answer>\n"
        "- **Hint:** <one hint that would improve the candidate; omit when the grade is 5>";
    return out;
}

std::optional<std::string> extract_final_guess(const std::string & reply) {
    const std::string marker = "**Final Guess:**";
    size_t pos = reply.find(marker);
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    size_t body = pos + marker.size();
    size_t end = reply.size();
    size_t scan = body;
    while (true) {
        size_t nl = reply.find('\n', scan);
        if (nl == std::string::npos) {
            break;
        }
        size_t line_start = nl + 1;
        if (reply.compare(line_start, 2, "**") == 0) {
            end = nl;
            break;
        }
        scan = line_start;
    }
    std::string guess = trim(reply.substr(body, end - body));
    if (guess.empty()) {
        return std::nullopt;
    }
    return guess;
}

// ==== grading ====

static std::string squash_whitespace(const std::string & text) {
    return join(split_whitespace(text), " ");
}

fim_grade grade_exact(const std::string & candidate, const std::string & truth) {
    if (!candidate.empty() && squash_whitespace(candidate) == squash_whitespace(truth)) {
        return {5, true, ""};
    }
    return {1, false, ""};
}

static fim_grade parse_grade_reply(const std::string & reply) {
    const std::string marker = "**Grade:**";
    size_t pos = reply.find(marker);
    if (pos == std::string::npos) {
        throw adjudication_error("grading reply lacks '**Grade:**': " + reply);
    }
    size_t i = pos + marker.size();
    while (i < reply.size() && (reply[i] < '0' || reply[i] > '9')) {
        if (reply[i] == '\n') {
            throw adjudication_error("grading reply has no number after '**Grade:**': " + reply);
        }
        i++;
    }
    if (i == reply.size()) {
        throw adjudication_error("grading reply has no number after '**Grade:**': " + reply);
    }
    size_t end = i;
    while (end < reply.size() && reply[end] >= '0' && reply[end] <= '9') {
        end++;
    }
    int grade = std::stoi(reply.substr(i, end - i));
    if (grade < 1 || grade > 5) {
        throw adjudication_error("grade " + std::to_string(grade) + " outside 1..5: " + reply);
    }

    fim_grade result;
    result.grade = grade;
    result.correct = grade >= 4;
    const std::string hint_marker = "**Hint:**";
    size_t hint_pos = reply.find(hint_marker, pos);
    if (hint_pos != std::string::npos) {
        size_t hint_end = reply.find('\n', hint_pos);
        if (hint_end == std::string::npos) {
            hint_end = reply.size();
        }
        result.hint = trim(reply.substr(hint_pos + hint_marker.size(),
                                        hint_end - hint_pos - hint_marker.size()));
    }
    return result;
}

fim_grade grade_with_judge(const fim_exercise & exercise, const std::string & candidate,
                           provider * judge, int retries, int max_tokens) {
    if (judge == nullptr) {
        throw validation_error("grade_with_judge: judge provider required");
    }
    completion_request req;
    req.context = render_prompt_context(render_grading_prompt(exercise, candidate));
    req.n = 1;
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    req.want_logprobs = false;

    std::string last_error;
    for (int attempt = 0; attempt <= retries; attempt++) {
        std::string reply = judge->sample_completions(req)[0].text();
        try {
            return parse_grade_reply(reply);
        } catch (const adjudication_error & e) {
            last_error = e.what();
        }
    }
    throw adjudication_error("grading reply unusable after " + std::to_string(retries + 1) +
                             " attempts; " + last_error);
}

fim_grade grade_candidate(const fim_exercise & exercise, const std::string & candidate,
                          const std::string & mode, provider * judge, int retries,
                          int max_tokens) {
    if (mode == "exact") {
        return grade_exact(candidate, exercise.ground_truth);
    }
    if (mode == "judge") {
        return grade_with_judge(exercise, candidate, judge, retries, max_tokens);
    }
    throw validation_error("grade_candidate: mode must be exact or judge");
}

// ==== rejection sampling ====

std::vector<fim_solution> rejection_sample_solutions(const fim_exercise & exercise,
                                                     provider * prov, int n,
                                                     const std::string & mode, provider * judge,
                                                     const fim_settings & cfg, int judge_retries) {
    if (n < 1) {
        throw validation_error("rejection_sample_solutions: n must be >= 1");
    }
    completion_request req;
    req.context = render_prompt_context(render_solving_prompt(exercise));
    req.n = n;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;

    std::vector<token_seq> rollouts = prov->sample_completions(req);
    std::vector<fim_solution> accepted;
    for (const token_seq & rollout : rollouts) {
        std::string full = rollout.text();
        std::optional<std::string> guess = extract_final_guess(full);
        if (!guess) {
            continue;
        }
        fim_grade grade = grade_candidate(exercise, *guess, mode, judge, judge_retries,
                                          cfg.max_tokens);
        if (grade.correct) {
            accepted.push_back({full, *guess, grade.grade});
        }
    }
    return accepted;
}

}  // namespace pv
