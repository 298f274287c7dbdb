#include "judge.hpp"

#include <cmath>

#include "common.hpp"
#include "jsonl.hpp"
#include "oracle.hpp"

namespace pv {

static const char * JUDGE_PROMPT_HEAD =
    "Your task is to judge which of the following reply given by an AI assistant is better.\n"
    "\n"
    "# Conversation\n"
    "\n";

static const char * JUDGE_PROMPT_MID =
    "\n"
    "\n"
    "# Replies\n"
    "\n";

static const char * JUDGE_PROMPT_TAIL = R"(

# Guideline

Produce your output in the following JSON format (without comments and with correct escape characters):
```json
{
    "faults": {
       "Assistant 1": "(string) List all the problems with the assistant 1 reply. For each problem try to determine whether this is due to lack of comprehension of the relevant material, a logical error, a factual error, a stylistic issue. If the answer is perfect, write none. If the question did not ask for a specific level of detail in the explanation, do not penalize the answer for being too detailed or too concise.",
       "Assistant 2": ...
       ...
    },
    "faults_discussion": "(string) Discuss the general strengths and weaknesses of each assistant. What are the main differences between the answers in terms of style, accuracy and level of detail?",
    "accuracy": {
       "Assistant 1": (1-5) how would you rate assistant 1 in terms of accuracy?,
        ...
    },
    "style": {
       "Assistant 1": (1-5) how would you rate assistant 1 in terms of style?,
        ...
    },
    "detail": {
       "Assistant 1": (1-5) how would you rate assistant 1 in terms of level of detail?,
        ...
    }
})";

std::string render_judge_prompt(const chat_transcript & chat,
                                const std::vector<std::string> & replies) {
    std::string reply_block;
    for (size_t i = 0; i < replies.size(); i++) {
        if (i > 0) {
            reply_block += "\n\n";
        }
        reply_block += "## Assistant " + std::to_string(i + 1) + "\n\n";
        reply_block += replies[i];
    }
    std::string out = JUDGE_PROMPT_HEAD;
    out += render_chatml(chat);
    out += JUDGE_PROMPT_MID;
    out += reply_block;
    out += JUDGE_PROMPT_TAIL;
    out += "\n```";
    return out;
}

static int score_field(const json & j, const std::string & table, const std::string & assistant,
                       const std::string & reply) {
    if (!j.contains(table) || !j[table].is_object() || !j[table].contains(assistant)) {
        throw adjudication_error("judge reply lacks " + table + " entry for " + assistant + ": " +
                                 reply);
    }
    const json & v = j[table][assistant];
    if (!v.is_number()) {
        throw adjudication_error("judge " + table + " for " + assistant + " is not numeric: " +
                                 reply);
    }
    double value = v.get<double>();
    if (value != std::floor(value) || value < 1.0 || value > 5.0) {
        throw adjudication_error("judge " + table + " for " + assistant + " outside 1..5: " +
                                 reply);
    }
    return (int) value;
}

static judge_score parse_judge_reply(const std::string & reply, size_t n_replies) {
    std::optional<std::string> block = extract_json_block(reply);
    if (!block) {
        throw adjudication_error("judge reply has no JSON block: " + reply);
    }
    json j = json::parse(*block, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw adjudication_error("judge reply JSON malformed: " + reply);
    }

    judge_score score;
    if (j.contains("faults_discussion") && j["faults_discussion"].is_string()) {
        score.faults_discussion = j["faults_discussion"].get<std::string>();
    }
    for (size_t i = 1; i <= n_replies; i++) {
        std::string assistant = "Assistant " + std::to_string(i);
        assistant_score entry;
        if (j.contains("faults") && j["faults"].is_object() && j["faults"].contains(assistant) &&
            j["faults"][assistant].is_string()) {
            entry.faults = j["faults"][assistant].get<std::string>();
        }
        entry.accuracy = score_field(j, "accuracy", assistant, reply);
        entry.style = score_field(j, "style", assistant, reply);
        entry.detail = score_field(j, "detail", assistant, reply);
        score.assistants.push_back(std::move(entry));
    }
    return score;
}

judge_score judge_responses(const chat_transcript & chat, const std::vector<std::string> & replies,
                            provider * judge, const judge_settings & cfg) {
    if (replies.size() < 2) {
        throw validation_error("judge_responses: needs at least 2 replies");
    }
    if (judge == nullptr) {
        throw validation_error("judge_responses: judge provider required");
    }

    completion_request req;
    req.context = render_prompt_context(render_judge_prompt(chat, replies));
    req.n = 1;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.want_logprobs = false;

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; attempt++) {
        std::string reply = judge->sample_completions(req)[0].text();
        try {
            return parse_judge_reply(reply, replies.size());
        } catch (const adjudication_error & e) {
            last_error = e.what();
        }
    }
    throw adjudication_error("judge reply unusable after " + std::to_string(cfg.max_retries + 1) +
                             " attempts; " + last_error);
}

static std::string compare_label(double first, double second) {
    if (first > second) {
        return "first";
    }
    if (second > first) {
        return "second";
    }
    return "tie";
}

std::vector<judge_pair> label_pairs(const judge_score & scores,
                                    const std::vector<std::string> & replies,
                                    const std::string & mode) {
    if (mode != "accuracy" && mode != "overall") {
        throw validation_error("label_pairs: mode must be accuracy or overall");
    }
    if (scores.assistants.size() != replies.size()) {
        throw validation_error("label_pairs: scores and replies disagree on count");
    }

    std::vector<judge_pair> pairs;
    for (size_t i = 0; i < replies.size(); i++) {
        for (size_t j = i + 1; j < replies.size(); j++) {
            const assistant_score & a = scores.assistants[i];
            const assistant_score & b = scores.assistants[j];
            std::string by_accuracy = compare_label(a.accuracy, b.accuracy);
            std::string by_overall = compare_label(a.overall(), b.overall());
            std::string winner = mode == "accuracy" ? by_accuracy : by_overall;
            if (winner == "tie") {
                continue;
            }
            judge_pair pair;
            pair.first_index = (int) i;
            pair.second_index = (int) j;
            pair.accepted = winner == "first" ? replies[i] : replies[j];
            pair.rejected = winner == "first" ? replies[j] : replies[i];
            pair.mode = mode;
            pair.label_accuracy = by_accuracy;
            pair.label_overall = by_overall;
            pair.first_score = a;
            pair.second_score = b;
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

}  // namespace pv
