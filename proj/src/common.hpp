// Shared plumbing for the pivotal core: error taxonomy, deterministic
// hashing and RNG streams, and small string / file helpers.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pv {

// ==== errors ====
// Core code throws; the C boundary and the CLI map these to status codes.

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad caller input: config values, malformed arguments, domain violations
struct validation_error : error {
    using error::error;
};

// malformed file contents or model replies
struct parse_error : error {
    using error::error;
};

// network failure that survived the retry schedule
struct transport_error : error {
    using error::error;
};

// broken environment: sandbox, filesystem, missing interpreter
struct infra_error : error {
    using error::error;
};

// a judge reply that could not be adjudicated after retries
struct adjudication_error : error {
    using error::error;
};

// ==== hashing ====

constexpr uint64_t FNV64_OFFSET = 0xcbf29ce484222325ull;
constexpr uint64_t FNV64_PRIME  = 0x100000001b3ull;

inline uint64_t fnv1a64(std::string_view s, uint64_t h = FNV64_OFFSET) {
    for (unsigned char c : s) {
        h ^= c;
        h *= FNV64_PRIME;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Order-sensitive combination of seed material into one stream id.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2)));
}

// ==== rng ====
// All sampling goes through explicit engines seeded from (global seed,
// request identity, sample index) so results never depend on thread
// interleaving or call batching.

inline std::mt19937_64 make_engine(uint64_t stream, uint64_t index) {
    return std::mt19937_64(mix_seed(stream, index));
}

// uniform in [0, 1) without distribution objects, which differ across
// standard libraries
inline double next_unit(std::mt19937_64 & eng) {
    return (eng() >> 11) * 0x1.0p-53;
}

// uniform integer in [0, n)
inline uint64_t next_below(std::mt19937_64 & eng, uint64_t n) {
    if (n == 0) {
        throw validation_error("next_below: empty range");
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % n;
}

// ==== strings ====

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string> & parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// first n whitespace-delimited tokens of s, joined by single spaces
std::string first_n_words(std::string_view s, size_t n);

// ==== files ====

std::string read_file(const std::string & path);
std::optional<std::string> read_file_if_exists(const std::string & path);

// write via a temp file in the same directory, then rename into place, so
// readers never observe a partial file
void atomic_write_file(const std::string & path, std::string_view content);

std::vector<std::string> read_lines(const std::string & path);

// ==== parallel_for ====
// Runs fn(i) for i in [0, n) on up to n_threads workers. Exceptions from
// workers are rethrown on the calling thread. fn must not care about
// execution order; callers keep outputs deterministic by writing to
// index i of a pre-sized buffer.

void parallel_for(size_t n, int n_threads, const std::function<void(size_t)> & fn);

}  // namespace pv
