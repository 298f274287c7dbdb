// Uniform interface to completion sources. Two live implementations: the
// JSON-over-HTTP adapter (chat or completion style) and the in-process
// simulator (simulator.hpp). Wrappers add request caching and a bound on
// in-flight requests.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace pv {

struct token {
    std::string text;
    std::optional<double> logprob;

    bool operator==(const token & other) const = default;
};

struct token_seq {
    std::vector<token> tokens;

    // surface text: concatenation of token texts
    std::string text() const;
    bool has_logprobs() const;
    size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }

    token_seq prefix(size_t n) const;
    token_seq slice(size_t begin, size_t end) const;

    static token_seq concat(const token_seq & a, const token_seq & b);

    bool operator==(const token_seq & other) const = default;
};

struct completion_request {
    std::string context;  // rendered prompt text
    int n = 1;
    double temperature = 1.0;
    int max_tokens = 512;
    std::vector<std::string> stop;
    std::optional<uint64_t> seed;
    bool want_logprobs = true;

    void validate() const;

    // stable identity used for cache keys and seed derivation
    uint64_t content_hash() const;
};

class provider {
public:
    virtual ~provider() = default;

    // returns exactly req.n sequences; logprobs populated when the source
    // supplies them
    virtual std::vector<token_seq> sample_completions(const completion_request & req) = 0;
};

// HTTP adapter for the common JSON completion interface. Retries transport
// failures, 429, and 5xx with exponential backoff up to max_attempts.
std::unique_ptr<provider> make_http_provider(const provider_settings & settings);

// Wraps inner with an on-disk request/response cache keyed by request hash.
// record: call through and store; replay: serve from disk, miss is an
// infra_error. inner may be null in replay mode.
std::unique_ptr<provider> make_caching_provider(std::unique_ptr<provider> inner,
                                                const std::string & cache_dir,
                                                const std::string & mode);

// Bounds concurrent sample_completions calls across all threads sharing
// this wrapper.
std::unique_ptr<provider> make_limited_provider(std::unique_ptr<provider> inner,
                                                int max_in_flight);

// Builds the full provider stack for one settings block: source kind, then
// cache, then in-flight limit. global_seed feeds the simulator's stream
// derivation.
std::unique_ptr<provider> make_provider(const provider_settings & settings, uint64_t global_seed);

}  // namespace pv
