#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jsonl.hpp"
#include "provider.hpp"

namespace pv {

// precision over attempted answers, recall over everything including refusals
double f1_score(uint64_t n_correct, uint64_t n_incorrect, uint64_t n_refused);

extern const char * const AMC_PROMPT_TEMPLATE;

std::string render_amc_prompt(const std::string & question,
                              const std::array<std::string, 5> & options);

// 6 points per correct, 1.5 per blank, 0 per incorrect; 25 entries each
double amc_score(const std::vector<std::string> & choices, const std::vector<std::string> & key);

std::optional<std::string> parse_boxed_choice(const std::string & solution);

struct choice_extraction {
    std::string choice = "blank";
    bool used_judge = false;
    std::string warning;
};

choice_extraction extract_choice(const std::string & solution, provider * judge = nullptr,
                                 const std::vector<std::string> & options = {}, int retries = 0);

struct mixture_source {
    std::string name;
    double fraction = 0.0;
    double unique_tokens = 0.0;
};

struct mixture_plan {
    double horizon_tokens = 0.0;
    std::vector<mixture_source> sources;
};

mixture_plan mixture_plan_from_json(const json & j, const std::string & where);

std::vector<std::pair<std::string, double>> mixture_epochs(const mixture_plan & plan);

}  // namespace pv
