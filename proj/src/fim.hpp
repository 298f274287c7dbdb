#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "provider.hpp"

namespace pv {

extern const char * const FIM_HOLE_MARKER;

struct fim_exercise {
    std::string source_id;
    std::string context_before;
    std::string ground_truth;
    std::string context_after;
    std::string policy;  // code | prose

    std::string reconstruct() const { return context_before + ground_truth + context_after; }
};

// nullopt when the document has no eligible interior span (skip, not a failure)
std::optional<fim_exercise> carve_exercise(const std::string & document,
                                           const std::string & source_id,
                                           const fim_settings & cfg, uint64_t seed);

std::string render_exercise(const fim_exercise & exercise);
std::string render_solving_prompt(const fim_exercise & exercise);
std::string render_grading_prompt(const fim_exercise & exercise, const std::string & candidate);

std::optional<std::string> extract_final_guess(const std::string & reply);

struct fim_grade {
    int grade = 1;  // 1..5
    bool correct = false;
    std::string hint;
};

fim_grade grade_exact(const std::string & candidate, const std::string & truth);
fim_grade grade_with_judge(const fim_exercise & exercise, const std::string & candidate,
                           provider * judge, int retries, int max_tokens);
fim_grade grade_candidate(const fim_exercise & exercise, const std::string & candidate,
                          const std::string & mode, provider * judge, int retries,
                          int max_tokens);

struct fim_solution {
    std::string full_text;  // complete reply, chain of thought included
    std::string guess;
    int grade = 0;
};

std::vector<fim_solution> rejection_sample_solutions(const fim_exercise & exercise,
                                                     provider * prov, int n,
                                                     const std::string & mode, provider * judge,
                                                     const fim_settings & cfg, int judge_retries);

}  // namespace pv
