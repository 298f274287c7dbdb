// Deterministic in-process completion source. A spec is a finite emission
// machine: each state either emits one of several tokens (with given
// probabilities, moving to a next state) or is terminal and emits its
// answer string as the final token. Exact success probabilities are
// computable by dynamic programming, which makes the simulator the ground
// truth for testing Monte-Carlo estimates.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "provider.hpp"

namespace pv {

struct sim_emission {
    std::string text;
    double prob = 0.0;
    int next = -1;
};

struct sim_state {
    std::string name;
    std::vector<sim_emission> emissions;  // empty for terminal states
    std::optional<std::string> answer;    // set for terminal states

    bool terminal() const { return answer.has_value(); }
};

struct simulator_spec {
    std::vector<sim_state> states;
    int start = 0;
    int max_len = 0;

    int state_index(const std::string & name) const;
};

// Spec JSON:
//   {"start": "s0", "max_len": 32,
//    "states": {"s0": {"emissions": [{"token": "A", "p": 0.6, "next": "w"}]},
//               "w":  {"answer": "42"}}}
simulator_spec parse_simulator_spec(const std::string & json_text, const std::string & source_name);
simulator_spec load_simulator_spec(const std::string & path);

// Checks: unique state names, valid transitions, per-state probabilities
// summing to 1 +- 1e-9, per-state prefix-free emission texts, and that
// every path from start terminates within max_len steps. Throws
// validation_error on the first violation.
void validate_spec(const simulator_spec & spec);

// Where a sampled token stream can stand after producing `text`.
struct sim_walk {
    int state = -1;
    bool answer_consumed = false;
};

// Follows `text` through the machine. Throws validation_error when the
// text is not a realizable emission path (including a final answer token
// for terminal states).
sim_walk walk_spec(const simulator_spec & spec, const std::string & text);

// Exact probability that a continuation sampled after `prefix_text` ends
// in a terminal state whose answer equals success_answer. Temperature-1
// sampling; computed by DP over states.
double exact_success_probability(const simulator_spec & spec, const std::string & prefix_text,
                                 const std::string & success_answer);

// Completion provider backed by the machine. The response prefix is the
// part of the request context after the last <|im_sep|>, or the whole
// context when no marker is present. Sample i of a request draws from an
// RNG stream derived from (request seed or default_seed, request hash, i),
// so results are reproducible regardless of batching or thread order.
std::unique_ptr<provider> make_simulator_provider(simulator_spec spec, uint64_t default_seed);

}  // namespace pv
