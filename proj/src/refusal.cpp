#include "refusal.hpp"

#include "common.hpp"

namespace pv {

// ==== generation prompts ====

static const char * BOGUS_PROMPT_HEAD = "Consider the following trivia question:\n\n# Question\n";

static const char * BOGUS_PROMPT_TAIL = R"(

# Instructions

Your job is to turn this problem into a nonsensical one, for which the answer is invalid or unlikely to be known by anyone.  For example, you might change the name from a well-known figure to a random name, or change the date from a well-known event to a random date, or the place to a different one.  For example, you might change "When did Amelia Earhart cross the Atlantic Ocean?" to "When did Edgar Greenwood cross the Atlantic Ocean?" or "How many times did Amelia Earhart cross the English Channel?".

Your goal is that the new question is *plausibly real*, but impossible to answer.  You should not make the question obviously fake, silly, or fictional; for example, all country names should be real countries, and no names should be obvious homages to the original question.  It should sound like a serious trivia question.

You may start with a very brief discussion, then end with two markdown sections:
 - The section '# Response' that contains the question.
 - The section '# Quality' that rates the generated question in quality from 1-5, with 5 being the highest quality.
     A high quality question is (1) different from the given question and (2) plausible)";

static const char * REFUSAL_PROMPT_HEAD = "Consider the following question:\n\n# Question\n";

static const char * REFUSAL_PROMPT_TAIL = R"(

# Instructions
You might well know the answer, but imagine that you were an LLM that did not know the correct answer. Write a plausible response to this question that the LLM might give if it did not know the answer and would like to say so rather than guess incorrectly.

This LLM cannot look things up.  It could suggest relevant information that it knows; it can also just say that it does not know the answer, if it is unlikely to know anything useful.

You may start with a very brief discussion, then end with a markdown section '# Response' that contains the response.)";

std::string render_bogus_prompt(const std::string & question) {
    return BOGUS_PROMPT_HEAD + question + BOGUS_PROMPT_TAIL;
}

std::string render_refusal_prompt(const std::string & question) {
    return REFUSAL_PROMPT_HEAD + question + REFUSAL_PROMPT_TAIL;
}

std::optional<std::string> extract_markdown_section(const std::string & reply,
                                                    const std::string & name) {
    std::string header = "# " + name;
    std::vector<std::string> lines = split(reply, '\n');
    std::optional<std::string> content;
    for (size_t i = 0; i < lines.size(); i++) {
        if (trim(lines[i]) != header) {
            continue;
        }
        std::vector<std::string> body;
        for (size_t j = i + 1; j < lines.size(); j++) {
            std::string t = trim(lines[j]);
            if (starts_with(t, "# ") || t == "#") {
                break;
            }
            body.push_back(lines[j]);
        }
        content = trim(join(body, "\n"));
        break;
    }
    return content;
}

static int parse_quality(const std::string & section, const std::string & reply) {
    size_t i = 0;
    while (i < section.size() && (section[i] < '0' || section[i] > '9')) {
        i++;
    }
    if (i == section.size()) {
        throw parse_error("bogus generation '# Quality' has no rating: " + reply);
    }
    size_t end = i;
    while (end < section.size() && section[end] >= '0' && section[end] <= '9') {
        end++;
    }
    int quality = std::stoi(section.substr(i, end - i));
    if (quality < 1 || quality > 5) {
        throw parse_error("bogus generation quality " + std::to_string(quality) +
                          " outside 1..5: " + reply);
    }
    return quality;
}

// ==== builder ====

refusal_builder::refusal_builder(provider * model, provider * generator, provider * judge,
                                 const refusal_settings & cfg, const oracle_settings & oracle_cfg)
    : model_(model), generator_(generator), judge_(judge), cfg_(cfg), oracle_cfg_(oracle_cfg) {
    if (model_ == nullptr || generator_ == nullptr) {
        throw validation_error("refusal_builder: model and generator providers required");
    }
}

std::string refusal_builder::complete(const std::string & prompt) {
    completion_request req;
    req.context = render_prompt_context(prompt);
    req.n = 1;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    return generator_->sample_completions(req)[0].text();
}

accuracy_estimate refusal_builder::estimate_accuracy(const std::string & question,
                                                     const std::string & answer_key,
                                                     const std::vector<std::string> & alternates) {
    if (cfg_.n_accuracy_runs < 1) {
        throw validation_error("estimate_accuracy: needs n >= 1 runs");
    }
    completion_request req;
    req.context = render_chatml({{"user", question}}, true);
    req.n = cfg_.n_accuracy_runs;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    std::vector<token_seq> rollouts = model_->sample_completions(req);

    accuracy_estimate est;
    est.n = (int) rollouts.size();
    int n_correct = 0;
    for (const token_seq & rollout : rollouts) {
        std::string text = rollout.text();
        est.samples.push_back(text);
        oracle_verdict v = check_answer(question, text, answer_key, alternates, judge_,
                                        oracle_cfg_.judge_retries);
        if (v.outcome == verdict::correct) {
            n_correct++;
        } else if (v.outcome == verdict::incorrect && !est.wrong_sample) {
            est.wrong_sample = text;
        }
    }
    est.accuracy = est.n > 0 ? (double) n_correct / est.n : 0.0;
    return est;
}

bogus_result refusal_builder::generate_bogus(const std::string & question) {
    std::string reply = complete(render_bogus_prompt(question));
    std::optional<std::string> response = extract_markdown_section(reply, "Response");
    if (!response || response->empty()) {
        throw parse_error("bogus generation reply lacks '# Response': " + reply);
    }
    std::optional<std::string> quality_section = extract_markdown_section(reply, "Quality");
    if (!quality_section) {
        throw parse_error("bogus generation reply lacks '# Quality': " + reply);
    }
    return {*response, parse_quality(*quality_section, reply)};
}

std::string refusal_builder::generate_refusal(const std::string & question) {
    std::string reply = complete(render_refusal_prompt(question));
    std::optional<std::string> response = extract_markdown_section(reply, "Response");
    if (!response || response->empty()) {
        throw parse_error("refusal generation reply lacks '# Response': " + reply);
    }
    return *response;
}

std::string refusal_builder::generate_correct(const std::string & question,
                                              const std::string & answer_key,
                                              const std::vector<std::string> & alternates) {
    std::string candidate = complete(question);
    oracle_verdict v =
        check_answer(question, candidate, answer_key, alternates, judge_, oracle_cfg_.judge_retries);
    if (v.outcome == verdict::correct) {
        return candidate;
    }
    // generator missed; the answer key itself is the one answer known to be correct
    return answer_key;
}

refusal_record refusal_builder::build_record(const std::string & question,
                                             const std::string & answer_key,
                                             const std::vector<std::string> & alternates) {
    if (question.empty() || answer_key.empty()) {
        throw validation_error("refusal seed needs question and answer");
    }
    refusal_record record;
    record.question = question;
    record.answer_key = answer_key;
    record.alternates = alternates;

    accuracy_estimate est = estimate_accuracy(question, answer_key, alternates);
    record.accuracy = est.accuracy;
    record.wrong_sample = est.wrong_sample;

    record.correct_answer = generate_correct(question, answer_key, alternates);
    record.refusal = generate_refusal(question);

    bogus_result bogus = generate_bogus(question);
    record.bogus_question = bogus.question;
    record.bogus_quality = bogus.quality;
    record.bogus_refusal = generate_refusal(bogus.question);
    return record;
}

// ==== row assembly ====

std::pair<std::vector<sft_row>, std::vector<dpo_row>> assemble_rows(const refusal_record & record,
                                                                    const refusal_settings & cfg) {
    std::vector<sft_row> sft;
    std::vector<dpo_row> dpo;

    if (record.accuracy >= cfg.usually_correct) {
        sft.push_back({{{"user", record.question}, {"assistant", record.correct_answer}}});
    }
    if (record.accuracy < cfg.usually_wrong) {
        sft.push_back({{{"user", record.question}, {"assistant", record.refusal}}});
    }
    if (record.bogus_question && record.bogus_refusal && record.bogus_quality &&
        *record.bogus_quality >= cfg.bogus_quality_floor) {
        sft.push_back({{{"user", *record.bogus_question}, {"assistant", *record.bogus_refusal}}});
    }

    auto truncate = [&cfg](const std::string & text) {
        return first_n_words(text, cfg.truncate_tokens);
    };
    if (record.accuracy > 0.0) {
        std::string accepted = truncate(record.correct_answer);
        std::string rejected = truncate(record.refusal);
        if (accepted != rejected) {
            dpo.push_back({record.question, accepted, rejected, cfg.truncate_tokens});
        }
    }
    if (record.accuracy < 1.0 && record.wrong_sample) {
        std::string accepted = truncate(record.refusal);
        std::string rejected = truncate(*record.wrong_sample);
        if (accepted != rejected) {
            dpo.push_back({record.question, accepted, rejected, cfg.truncate_tokens});
        }
    }
    return {std::move(sft), std::move(dpo)};
}

}  // namespace pv
