#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chatml.hpp"
#include "config.hpp"
#include "oracle.hpp"
#include "provider.hpp"

namespace pv {

std::string render_bogus_prompt(const std::string & question);
std::string render_refusal_prompt(const std::string & question);

// content under a top-level '# name' header, up to the next top-level header
std::optional<std::string> extract_markdown_section(const std::string & reply,
                                                    const std::string & name);

struct bogus_result {
    std::string question;
    int quality = 0;  // 1..5
};

struct accuracy_estimate {
    double accuracy = 0.0;
    int n = 0;
    std::vector<std::string> samples;
    std::optional<std::string> wrong_sample;  // first sample judged incorrect
};

struct refusal_record {
    std::string question;
    std::string answer_key;
    std::vector<std::string> alternates;
    double accuracy = 0.0;
    std::string correct_answer;
    std::string refusal;
    std::optional<std::string> bogus_question;
    std::optional<int> bogus_quality;
    std::optional<std::string> bogus_refusal;
    std::optional<std::string> wrong_sample;
};

struct sft_row {
    chat_transcript messages;
};

struct dpo_row {
    std::string context;
    std::string accepted;
    std::string rejected;
    int truncated_to = 0;
};

class refusal_builder {
  public:
    refusal_builder(provider * model, provider * generator, provider * judge,
                    const refusal_settings & cfg, const oracle_settings & oracle_cfg);

    accuracy_estimate estimate_accuracy(const std::string & question,
                                        const std::string & answer_key,
                                        const std::vector<std::string> & alternates);
    bogus_result generate_bogus(const std::string & question);
    std::string generate_refusal(const std::string & question);
    std::string generate_correct(const std::string & question, const std::string & answer_key,
                                 const std::vector<std::string> & alternates);
    refusal_record build_record(const std::string & question, const std::string & answer_key,
                                const std::vector<std::string> & alternates);

  private:
    std::string complete(const std::string & prompt);

    provider * model_;
    provider * generator_;
    provider * judge_;
    refusal_settings cfg_;
    oracle_settings oracle_cfg_;
};

std::pair<std::vector<sft_row>, std::vector<dpo_row>> assemble_rows(const refusal_record & record,
                                                                    const refusal_settings & cfg);

}  // namespace pv
