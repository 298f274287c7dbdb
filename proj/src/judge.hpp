#pragma once

#include <string>
#include <vector>

#include "chatml.hpp"
#include "config.hpp"
#include "provider.hpp"

namespace pv {

struct assistant_score {
    std::string faults;
    int accuracy = 0;  // 1..5
    int style = 0;
    int detail = 0;

    double overall() const { return (accuracy + style + detail) / 3.0; }
};

struct judge_score {
    std::vector<assistant_score> assistants;  // index 0 is Assistant 1
    std::string faults_discussion;
};

struct judge_pair {
    int first_index = 0;  // 0-based reply indices, first_index < second_index
    int second_index = 0;
    std::string accepted;
    std::string rejected;
    std::string mode;            // mode that produced this pair
    std::string label_accuracy;  // first | second | tie
    std::string label_overall;
    assistant_score first_score;
    assistant_score second_score;
};

std::string render_judge_prompt(const chat_transcript & chat,
                                const std::vector<std::string> & replies);

// scores every reply with the judge model; adjudication_error after retries exhausted
judge_score judge_responses(const chat_transcript & chat, const std::vector<std::string> & replies,
                            provider * judge, const judge_settings & cfg);

std::vector<judge_pair> label_pairs(const judge_score & scores,
                                    const std::vector<std::string> & replies,
                                    const std::string & mode);

}  // namespace pv
