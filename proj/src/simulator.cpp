#include "simulator.hpp"

#include <json.hpp>

#include <cmath>
#include <map>

#include "chatml.hpp"
#include "common.hpp"

namespace pv {

using njson = nlohmann::ordered_json;

int simulator_spec::state_index(const std::string & name) const {
    for (size_t i = 0; i < states.size(); i++) {
        if (states[i].name == name) {
            return (int) i;
        }
    }
    return -1;
}

// ==== parsing ====

simulator_spec parse_simulator_spec(const std::string & json_text, const std::string & source_name) {
    njson root = njson::parse(json_text, nullptr, false);
    if (root.is_discarded()) {
        throw parse_error(source_name + ": malformed simulator spec JSON");
    }
    if (!root.contains("states") || !root["states"].is_object()) {
        throw parse_error(source_name + ": spec needs a 'states' object");
    }

    simulator_spec spec;
    std::map<std::string, int> index;
    for (auto it = root["states"].begin(); it != root["states"].end(); ++it) {
        sim_state st;
        st.name = it.key();
        index[st.name] = (int) spec.states.size();
        spec.states.push_back(std::move(st));
    }
    for (auto it = root["states"].begin(); it != root["states"].end(); ++it) {
        sim_state & st = spec.states[(size_t) index[it.key()]];
        const njson & body = it.value();
        if (body.contains("answer")) {
            if (!body["answer"].is_string()) {
                throw parse_error(source_name + ": state '" + st.name + "' answer must be a string");
            }
            st.answer = body["answer"].get<std::string>();
        }
        if (body.contains("emissions")) {
            if (!body["emissions"].is_array()) {
                throw parse_error(source_name + ": state '" + st.name + "' emissions must be an array");
            }
            for (const njson & e : body["emissions"]) {
                sim_emission em;
                if (!e.contains("token") || !e["token"].is_string() ||
                    !e.contains("p") || !e["p"].is_number() ||
                    !e.contains("next") || !e["next"].is_string()) {
                    throw parse_error(source_name + ": state '" + st.name +
                                      "' emission needs token, p, next");
                }
                em.text = e["token"].get<std::string>();
                em.prob = e["p"].get<double>();
                std::string next = e["next"].get<std::string>();
                auto nit = index.find(next);
                if (nit == index.end()) {
                    throw parse_error(source_name + ": state '" + st.name +
                                      "' transitions to unknown state '" + next + "'");
                }
                em.next = nit->second;
                st.emissions.push_back(std::move(em));
            }
        }
    }

    std::string start_name = root.value("start", "");
    auto sit = index.find(start_name);
    if (sit == index.end()) {
        throw parse_error(source_name + ": unknown start state '" + start_name + "'");
    }
    spec.start = sit->second;
    if (!root.contains("max_len") || !root["max_len"].is_number_integer()) {
        throw parse_error(source_name + ": spec needs an integer max_len");
    }
    spec.max_len = root["max_len"].get<int>();

    validate_spec(spec);
    return spec;
}

simulator_spec load_simulator_spec(const std::string & path) {
    return parse_simulator_spec(read_file(path), path);
}

// ==== validation ====

namespace {

// longest emission path from state to any terminal; throws on cycles
int longest_path(const simulator_spec & spec, int state, std::vector<int> & memo,
                 std::vector<char> & on_stack) {
    if (memo[(size_t) state] >= 0) {
        return memo[(size_t) state];
    }
    if (on_stack[(size_t) state]) {
        throw validation_error("simulator spec: cycle reachable from state '" +
                               spec.states[(size_t) state].name + "'");
    }
    const sim_state & st = spec.states[(size_t) state];
    if (st.terminal()) {
        memo[(size_t) state] = 0;
        return 0;
    }
    on_stack[(size_t) state] = 1;
    int best = 0;
    for (const sim_emission & e : st.emissions) {
        int len = 1 + longest_path(spec, e.next, memo, on_stack);
        if (len > best) {
            best = len;
        }
    }
    on_stack[(size_t) state] = 0;
    memo[(size_t) state] = best;
    return best;
}

}  // namespace

void validate_spec(const simulator_spec & spec) {
    if (spec.states.empty()) {
        throw validation_error("simulator spec: no states");
    }
    if (spec.max_len < 1) {
        throw validation_error("simulator spec: max_len must be >= 1");
    }
    for (const sim_state & st : spec.states) {
        if (st.terminal()) {
            if (!st.emissions.empty()) {
                throw validation_error("simulator spec: terminal state '" + st.name +
                                       "' must not emit");
            }
            if (st.answer->empty()) {
                throw validation_error("simulator spec: terminal state '" + st.name +
                                       "' has an empty answer");
            }
            continue;
        }
        if (st.emissions.empty()) {
            throw validation_error("simulator spec: state '" + st.name +
                                   "' has neither emissions nor an answer");
        }
        double sum = 0.0;
        for (const sim_emission & e : st.emissions) {
            if (e.text.empty()) {
                throw validation_error("simulator spec: state '" + st.name +
                                       "' has an empty emission token");
            }
            if (e.prob <= 0.0 || e.prob > 1.0) {
                throw validation_error("simulator spec: state '" + st.name +
                                       "' emission probability out of (0, 1]");
            }
            sum += e.prob;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw validation_error("simulator spec: state '" + st.name +
                                   "' emission probabilities sum to " + std::to_string(sum));
        }
        // prefix-free emission texts keep path decoding unambiguous
        for (size_t i = 0; i < st.emissions.size(); i++) {
            for (size_t j = 0; j < st.emissions.size(); j++) {
                if (i != j && starts_with(st.emissions[j].text, st.emissions[i].text)) {
                    throw validation_error("simulator spec: state '" + st.name +
                                           "' emissions are not prefix-free ('" +
                                           st.emissions[i].text + "' vs '" +
                                           st.emissions[j].text + "')");
                }
            }
        }
    }

    std::vector<int> memo(spec.states.size(), -1);
    std::vector<char> on_stack(spec.states.size(), 0);
    int longest = longest_path(spec, spec.start, memo, on_stack);
    if (longest > spec.max_len) {
        throw validation_error("simulator spec: a path of " + std::to_string(longest) +
                               " steps exceeds max_len " + std::to_string(spec.max_len));
    }
}

// ==== walking ====

sim_walk walk_spec(const simulator_spec & spec, const std::string & text) {
    sim_walk walk;
    walk.state = spec.start;
    std::string_view rest = text;
    while (!rest.empty()) {
        const sim_state & st = spec.states[(size_t) walk.state];
        if (st.terminal()) {
            if (rest == *st.answer) {
                walk.answer_consumed = true;
                return walk;
            }
            throw validation_error("unrealizable prefix: terminal state '" + st.name +
                                   "' expects its answer token, got '" + std::string(rest) + "'");
        }
        const sim_emission * matched = nullptr;
        for (const sim_emission & e : st.emissions) {
            if (starts_with(rest, e.text)) {
                matched = &e;
                break;
            }
        }
        if (matched == nullptr) {
            throw validation_error("unrealizable prefix: no emission of state '" + st.name +
                                   "' starts the remaining text '" +
                                   std::string(rest.substr(0, 24)) + "'");
        }
        rest.remove_prefix(matched->text.size());
        walk.state = matched->next;
    }
    return walk;
}

double exact_success_probability(const simulator_spec & spec, const std::string & prefix_text,
                                 const std::string & success_answer) {
    sim_walk walk = walk_spec(spec, prefix_text);
    const sim_state & at = spec.states[(size_t) walk.state];
    if (walk.answer_consumed || at.terminal()) {
        return at.answer && *at.answer == success_answer ? 1.0 : 0.0;
    }

    // acyclic by validation, so plain memoized recursion terminates
    std::vector<double> memo(spec.states.size(), -1.0);
    auto dp = [&](auto && self, int state) -> double {
        if (memo[(size_t) state] >= 0.0) {
            return memo[(size_t) state];
        }
        const sim_state & st = spec.states[(size_t) state];
        double p;
        if (st.terminal()) {
            p = *st.answer == success_answer ? 1.0 : 0.0;
        } else {
            p = 0.0;
            for (const sim_emission & e : st.emissions) {
                p += e.prob * self(self, e.next);
            }
        }
        memo[(size_t) state] = p;
        return p;
    };
    return dp(dp, walk.state);
}

// ==== provider ====

namespace {

class simulator_provider final : public provider {
public:
    simulator_provider(simulator_spec spec, uint64_t default_seed)
        : spec_(std::move(spec)), default_seed_(default_seed) {
        validate_spec(spec_);
    }

    std::vector<token_seq> sample_completions(const completion_request & req) override {
        req.validate();

        // the prompt part of the context is opaque to the machine; only the
        // open response prefix (after the last role separator) walks it
        std::string prefix = response_prefix(req.context);
        sim_walk start = walk_spec(spec_, prefix);

        uint64_t stream = mix_seed(req.seed ? *req.seed : default_seed_, req.content_hash());
        std::vector<token_seq> out;
        out.reserve((size_t) req.n);
        for (int i = 0; i < req.n; i++) {
            std::mt19937_64 eng = make_engine(stream, (uint64_t) i);
            out.push_back(sample_one(start, req, eng));
        }
        return out;
    }

private:
    static std::string response_prefix(const std::string & context) {
        size_t pos = context.rfind(CHATML_SEP);
        if (pos == std::string::npos) {
            return context;
        }
        return context.substr(pos + std::string(CHATML_SEP).size());
    }

    token_seq sample_one(sim_walk at, const completion_request & req, std::mt19937_64 & eng) const {
        token_seq seq;
        if (at.answer_consumed) {
            return seq;
        }
        int state = at.state;
        while ((int) seq.tokens.size() < req.max_tokens) {
            const sim_state & st = spec_.states[(size_t) state];
            if (st.terminal()) {
                seq.tokens.push_back({*st.answer, 0.0});
                break;
            }
            const sim_emission * chosen;
            double logprob;
            pick(st, req.temperature, eng, chosen, logprob);
            seq.tokens.push_back({chosen->text, logprob});
            if (hit_stop(seq, req.stop)) {
                seq.tokens.pop_back();
                return seq;
            }
            state = chosen->next;
        }
        return seq;
    }

    static bool hit_stop(const token_seq & seq, const std::vector<std::string> & stop) {
        if (stop.empty()) {
            return false;
        }
        std::string text = seq.text();
        for (const std::string & s : stop) {
            if (!s.empty() && text.find(s) != std::string::npos) {
                return true;
            }
        }
        return false;
    }

    void pick(const sim_state & st, double temperature, std::mt19937_64 & eng,
              const sim_emission *& chosen, double & logprob) const {
        if (temperature == 0.0) {
            // greedy: max probability, first listed on ties
            const sim_emission * best = &st.emissions[0];
            for (const sim_emission & e : st.emissions) {
                if (e.prob > best->prob) {
                    best = &e;
                }
            }
            chosen = best;
            logprob = 0.0;
            return;
        }
        std::vector<double> weights(st.emissions.size());
        double total = 0.0;
        if (temperature == 1.0) {
            for (size_t i = 0; i < st.emissions.size(); i++) {
                weights[i] = st.emissions[i].prob;
                total += weights[i];
            }
        } else {
            for (size_t i = 0; i < st.emissions.size(); i++) {
                weights[i] = std::pow(st.emissions[i].prob, 1.0 / temperature);
                total += weights[i];
            }
        }
        double u = next_unit(eng) * total;
        double acc = 0.0;
        size_t pick_index = st.emissions.size() - 1;
        for (size_t i = 0; i < st.emissions.size(); i++) {
            acc += weights[i];
            if (u < acc) {
                pick_index = i;
                break;
            }
        }
        chosen = &st.emissions[pick_index];
        logprob = std::log(weights[pick_index] / total);
    }

    simulator_spec spec_;
    uint64_t default_seed_;
};

}  // namespace

std::unique_ptr<provider> make_simulator_provider(simulator_spec spec, uint64_t default_seed) {
    return std::make_unique<simulator_provider>(std::move(spec), default_seed);
}

}  // namespace pv
