#include "config.hpp"

#include <cstdlib>
#include <thread>

#include "common.hpp"

namespace pv {

std::vector<std::string> split_csv(const std::string & csv) {
    std::vector<std::string> out;
    for (const std::string & part : split(csv, ',')) {
        std::string t = trim(part);
        if (!t.empty()) {
            out.push_back(t);
        }
    }
    return out;
}

const provider_settings & run_config::provider_for(const std::string & role) const {
    auto it = providers.find(role);
    if (it != providers.end()) {
        return it->second;
    }
    return provider;
}

int run_config::effective_threads() const {
    if (threads > 0) {
        return threads;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? (int) hw : 1;
}

// ==== field dispatch ====

static uint64_t parse_u64(const std::string & key, const std::string & value) {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception &) {
        throw validation_error("config: '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

static int parse_int(const std::string & key, const std::string & value) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception &) {
        throw validation_error("config: '" + key + "' expects an integer, got '" + value + "'");
    }
}

static double parse_real(const std::string & key, const std::string & value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception &) {
        throw validation_error("config: '" + key + "' expects a number, got '" + value + "'");
    }
}

static bool set_provider_key(provider_settings & p, const std::string & full_key,
                             const std::string & key, const std::string & value) {
    if (key == "kind") {
        p.kind = value;
    } else if (key == "base_url") {
        p.base_url = value;
    } else if (key == "model") {
        p.model = value;
    } else if (key == "api_key_env") {
        p.api_key_env = value;
    } else if (key == "api_style") {
        p.api_style = value;
    } else if (key == "simulator_spec") {
        p.simulator_spec = value;
    } else if (key == "cache_dir") {
        p.cache_dir = value;
    } else if (key == "cache_mode") {
        p.cache_mode = value;
    } else if (key == "max_in_flight") {
        p.max_in_flight = parse_int(full_key, value);
    } else if (key == "max_attempts") {
        p.max_attempts = parse_int(full_key, value);
    } else if (key == "backoff_ms") {
        p.backoff_ms = parse_int(full_key, value);
    } else if (key == "timeout_ms") {
        p.timeout_ms = parse_int(full_key, value);
    } else {
        return false;
    }
    return true;
}

static std::string get_provider_key(const provider_settings & p, const std::string & key) {
    if (key == "kind")           return p.kind;
    if (key == "base_url")       return p.base_url;
    if (key == "model")          return p.model;
    if (key == "api_key_env")    return p.api_key_env;
    if (key == "api_style")      return p.api_style;
    if (key == "simulator_spec") return p.simulator_spec;
    if (key == "cache_dir")      return p.cache_dir;
    if (key == "cache_mode")     return p.cache_mode;
    if (key == "max_in_flight")  return std::to_string(p.max_in_flight);
    if (key == "max_attempts")   return std::to_string(p.max_attempts);
    if (key == "backoff_ms")     return std::to_string(p.backoff_ms);
    if (key == "timeout_ms")     return std::to_string(p.timeout_ms);
    throw validation_error("config: unknown provider key '" + key + "'");
}

void run_config::set(const std::string & dotted_key, const std::string & value) {
    size_t dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        throw validation_error("config: key '" + dotted_key + "' must be section.field");
    }
    std::string section = dotted_key.substr(0, dot);
    std::string key = dotted_key.substr(dot + 1);

    if (section == "run") {
        if (key == "seed") {
            seed = parse_u64(dotted_key, value);
        } else if (key == "threads") {
            threads = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "provider") {
        // provider.NAME.field addresses an extra provider role
        size_t sub = key.find('.');
        if (sub != std::string::npos) {
            std::string name = key.substr(0, sub);
            std::string field = key.substr(sub + 1);
            if (!set_provider_key(providers[name], dotted_key, field, value)) {
                throw validation_error("config: unknown key '" + dotted_key + "'");
            }
            return;
        }
        if (!set_provider_key(provider, dotted_key, key, value)) {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "pts") {
        if (key == "p_gap") {
            pts.p_gap = parse_real(dotted_key, value);
        } else if (key == "n_rollouts") {
            pts.n_rollouts = parse_int(dotted_key, value);
        } else if (key == "temperature") {
            pts.temperature = parse_real(dotted_key, value);
        } else if (key == "max_tokens") {
            pts.max_tokens = parse_int(dotted_key, value);
        } else if (key == "min_support") {
            pts.min_support = parse_int(dotted_key, value);
        } else if (key == "prefilter_lo") {
            pts.prefilter_lo = parse_real(dotted_key, value);
        } else if (key == "prefilter_hi") {
            pts.prefilter_hi = parse_real(dotted_key, value);
        } else if (key == "completions_per_query") {
            pts.completions_per_query = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "oracle") {
        if (key == "plurality_k") {
            oracle.plurality_k = parse_int(dotted_key, value);
        } else if (key == "equivalence") {
            oracle.equivalence = value;
        } else if (key == "sandbox_time_s") {
            oracle.sandbox_time_s = parse_real(dotted_key, value);
        } else if (key == "sandbox_memory_mb") {
            oracle.sandbox_memory_mb = parse_int(dotted_key, value);
        } else if (key == "judge_retries") {
            oracle.judge_retries = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "decontam") {
        if (key == "info_7gram_threshold") {
            decontam.info_7gram_threshold = parse_real(dotted_key, value);
        } else if (key == "contaminated_7gram_threshold") {
            decontam.contaminated_7gram_threshold = parse_real(dotted_key, value);
        } else if (key == "allowed_min_frequency") {
            decontam.allowed_min_frequency = parse_int(dotted_key, value);
        } else if (key == "allowed_file") {
            decontam.allowed_file = value;
        } else if (key == "benchmarks") {
            decontam.benchmarks = value;
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "refusal") {
        if (key == "usually_correct") {
            refusal.usually_correct = parse_real(dotted_key, value);
        } else if (key == "usually_wrong") {
            refusal.usually_wrong = parse_real(dotted_key, value);
        } else if (key == "bogus_quality_floor") {
            refusal.bogus_quality_floor = parse_int(dotted_key, value);
        } else if (key == "n_accuracy_runs") {
            refusal.n_accuracy_runs = parse_int(dotted_key, value);
        } else if (key == "truncate_tokens") {
            refusal.truncate_tokens = parse_int(dotted_key, value);
        } else if (key == "temperature") {
            refusal.temperature = parse_real(dotted_key, value);
        } else if (key == "max_tokens") {
            refusal.max_tokens = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "judge") {
        if (key == "mode") {
            judge.mode = value;
        } else if (key == "max_retries") {
            judge.max_retries = parse_int(dotted_key, value);
        } else if (key == "temperature") {
            judge.temperature = parse_real(dotted_key, value);
        } else if (key == "sources") {
            judge.sources = value;
        } else if (key == "max_tokens") {
            judge.max_tokens = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "fim") {
        if (key == "policy") {
            fim.policy = value;
        } else if (key == "min_lines") {
            fim.min_lines = parse_int(dotted_key, value);
        } else if (key == "max_lines") {
            fim.max_lines = parse_int(dotted_key, value);
        } else if (key == "n_samples") {
            fim.n_samples = parse_int(dotted_key, value);
        } else if (key == "grade_mode") {
            fim.grade_mode = value;
        } else if (key == "temperature") {
            fim.temperature = parse_real(dotted_key, value);
        } else if (key == "max_tokens") {
            fim.max_tokens = parse_int(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    if (section == "eval") {
        if (key == "amc_generations") {
            eval.amc_generations = parse_int(dotted_key, value);
        } else if (key == "amc_temperature") {
            eval.amc_temperature = parse_real(dotted_key, value);
        } else {
            throw validation_error("config: unknown key '" + dotted_key + "'");
        }
        return;
    }
    throw validation_error("config: unknown section '" + section + "'");
}

std::string run_config::get(const std::string & dotted_key) const {
    size_t dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        throw validation_error("config: key '" + dotted_key + "' must be section.field");
    }
    std::string section = dotted_key.substr(0, dot);
    std::string key = dotted_key.substr(dot + 1);

    if (section == "run") {
        if (key == "seed")    return std::to_string(seed);
        if (key == "threads") return std::to_string(threads);
    } else if (section == "provider") {
        size_t sub = key.find('.');
        if (sub != std::string::npos) {
            std::string name = key.substr(0, sub);
            auto it = providers.find(name);
            if (it == providers.end()) {
                throw validation_error("config: unknown provider role '" + name + "'");
            }
            return get_provider_key(it->second, key.substr(sub + 1));
        }
        return get_provider_key(provider, key);
    } else if (section == "pts") {
        if (key == "p_gap")                 return std::to_string(pts.p_gap);
        if (key == "n_rollouts")            return std::to_string(pts.n_rollouts);
        if (key == "temperature")           return std::to_string(pts.temperature);
        if (key == "max_tokens")            return std::to_string(pts.max_tokens);
        if (key == "min_support")           return std::to_string(pts.min_support);
        if (key == "prefilter_lo")          return std::to_string(pts.prefilter_lo);
        if (key == "prefilter_hi")          return std::to_string(pts.prefilter_hi);
        if (key == "completions_per_query") return std::to_string(pts.completions_per_query);
    } else if (section == "oracle") {
        if (key == "plurality_k")       return std::to_string(oracle.plurality_k);
        if (key == "equivalence")       return oracle.equivalence;
        if (key == "sandbox_time_s")    return std::to_string(oracle.sandbox_time_s);
        if (key == "sandbox_memory_mb") return std::to_string(oracle.sandbox_memory_mb);
        if (key == "judge_retries")     return std::to_string(oracle.judge_retries);
    } else if (section == "decontam") {
        if (key == "info_7gram_threshold")         return std::to_string(decontam.info_7gram_threshold);
        if (key == "contaminated_7gram_threshold") return std::to_string(decontam.contaminated_7gram_threshold);
        if (key == "allowed_min_frequency")        return std::to_string(decontam.allowed_min_frequency);
        if (key == "allowed_file")                 return decontam.allowed_file;
        if (key == "benchmarks")                   return decontam.benchmarks;
    } else if (section == "refusal") {
        if (key == "usually_correct")     return std::to_string(refusal.usually_correct);
        if (key == "usually_wrong")       return std::to_string(refusal.usually_wrong);
        if (key == "bogus_quality_floor") return std::to_string(refusal.bogus_quality_floor);
        if (key == "n_accuracy_runs")     return std::to_string(refusal.n_accuracy_runs);
        if (key == "truncate_tokens")     return std::to_string(refusal.truncate_tokens);
        if (key == "temperature")         return std::to_string(refusal.temperature);
        if (key == "max_tokens")          return std::to_string(refusal.max_tokens);
    } else if (section == "judge") {
        if (key == "mode")        return judge.mode;
        if (key == "max_retries") return std::to_string(judge.max_retries);
        if (key == "temperature") return std::to_string(judge.temperature);
        if (key == "sources")     return judge.sources;
        if (key == "max_tokens")  return std::to_string(judge.max_tokens);
    } else if (section == "fim") {
        if (key == "policy")     return fim.policy;
        if (key == "min_lines")  return std::to_string(fim.min_lines);
        if (key == "max_lines")  return std::to_string(fim.max_lines);
        if (key == "n_samples")  return std::to_string(fim.n_samples);
        if (key == "grade_mode") return fim.grade_mode;
        if (key == "temperature") return std::to_string(fim.temperature);
        if (key == "max_tokens") return std::to_string(fim.max_tokens);
    } else if (section == "eval") {
        if (key == "amc_generations") return std::to_string(eval.amc_generations);
        if (key == "amc_temperature") return std::to_string(eval.amc_temperature);
    }
    throw validation_error("config: unknown key '" + dotted_key + "'");
}

// ==== validation ====

static void check(bool ok, const std::string & what) {
    if (!ok) {
        throw validation_error("config: " + what);
    }
}

static void validate_provider(const provider_settings & p, const std::string & where) {
    check(p.kind == "simulator" || p.kind == "http" || p.kind == "replay",
          where + ".kind must be simulator, http, or replay");
    check(p.api_style == "chat" || p.api_style == "completion",
          where + ".api_style must be chat or completion");
    check(p.cache_mode == "off" || p.cache_mode == "record" || p.cache_mode == "replay",
          where + ".cache_mode must be off, record, or replay");
    check(p.max_in_flight >= 1, where + ".max_in_flight must be >= 1");
    check(p.max_attempts >= 1, where + ".max_attempts must be >= 1");
    check(p.backoff_ms >= 0, where + ".backoff_ms must be >= 0");
    check(p.timeout_ms >= 1, where + ".timeout_ms must be >= 1");
    // kind-specific path requirements are checked when a provider is built,
    // so file-only runs need no completion source configured
}

void run_config::validate() const {
    check(threads >= 0, "run.threads must be >= 0");

    validate_provider(provider, "provider");
    for (const auto & [name, p] : providers) {
        validate_provider(p, "provider." + name);
    }

    check(pts.p_gap > 0.0 && pts.p_gap <= 1.0, "pts.p_gap must be in (0, 1]");
    check(pts.n_rollouts >= 1, "pts.n_rollouts must be >= 1");
    check(pts.temperature >= 0.0, "pts.temperature must be >= 0");
    check(pts.max_tokens >= 1, "pts.max_tokens must be >= 1");
    check(pts.min_support >= 1, "pts.min_support must be >= 1");
    check(pts.prefilter_lo >= 0.0 && pts.prefilter_hi <= 1.0 && pts.prefilter_lo < pts.prefilter_hi,
          "pts prefilter band must satisfy 0 <= lo < hi <= 1");
    check(pts.completions_per_query >= 1, "pts.completions_per_query must be >= 1");

    check(oracle.plurality_k >= 2, "oracle.plurality_k must be >= 2");
    check(oracle.equivalence == "normalized" || oracle.equivalence == "judge",
          "oracle.equivalence must be normalized or judge");
    check(oracle.sandbox_time_s > 0.0, "oracle.sandbox_time_s must be > 0");
    check(oracle.sandbox_memory_mb >= 16, "oracle.sandbox_memory_mb must be >= 16");
    check(oracle.judge_retries >= 0, "oracle.judge_retries must be >= 0");

    check(decontam.info_7gram_threshold >= 0.0 && decontam.info_7gram_threshold <= 1.0,
          "decontam.info_7gram_threshold must be in [0, 1]");
    check(decontam.contaminated_7gram_threshold >= 0.0 && decontam.contaminated_7gram_threshold <= 1.0,
          "decontam.contaminated_7gram_threshold must be in [0, 1]");
    check(decontam.info_7gram_threshold <= decontam.contaminated_7gram_threshold,
          "decontam.info_7gram_threshold must be <= contaminated_7gram_threshold");
    check(decontam.allowed_min_frequency >= 1, "decontam.allowed_min_frequency must be >= 1");

    check(refusal.usually_correct >= 0.0 && refusal.usually_correct <= 1.0,
          "refusal.usually_correct must be in [0, 1]");
    check(refusal.usually_wrong >= 0.0 && refusal.usually_wrong <= 1.0,
          "refusal.usually_wrong must be in [0, 1]");
    check(refusal.bogus_quality_floor >= 1 && refusal.bogus_quality_floor <= 5,
          "refusal.bogus_quality_floor must be in 1..5");
    check(refusal.n_accuracy_runs >= 1, "refusal.n_accuracy_runs must be >= 1");
    check(refusal.truncate_tokens >= 1, "refusal.truncate_tokens must be >= 1");
    check(refusal.temperature >= 0.0, "refusal.temperature must be >= 0");
    check(refusal.max_tokens >= 1, "refusal.max_tokens must be >= 1");

    check(judge.mode == "accuracy" || judge.mode == "overall",
          "judge.mode must be accuracy or overall");
    check(judge.max_retries >= 0, "judge.max_retries must be >= 0");
    check(judge.temperature >= 0.0, "judge.temperature must be >= 0");
    check(judge.max_tokens >= 1, "judge.max_tokens must be >= 1");

    check(fim.policy == "code" || fim.policy == "prose", "fim.policy must be code or prose");
    check(fim.min_lines >= 1, "fim.min_lines must be >= 1");
    check(fim.max_lines >= fim.min_lines, "fim.max_lines must be >= fim.min_lines");
    check(fim.n_samples >= 1, "fim.n_samples must be >= 1");
    check(fim.grade_mode == "exact" || fim.grade_mode == "judge",
          "fim.grade_mode must be exact or judge");
    check(fim.temperature >= 0.0, "fim.temperature must be >= 0");
    check(fim.max_tokens >= 1, "fim.max_tokens must be >= 1");

    check(eval.amc_generations >= 1, "eval.amc_generations must be >= 1");
    check(eval.amc_temperature >= 0.0, "eval.amc_temperature must be >= 0");
}

// ==== parsing ====

run_config parse_config(const std::string & text, const std::string & source_name) {
    run_config cfg;
    std::string section;
    std::vector<std::string> lines = split(text, '\n');
    for (size_t i = 0; i < lines.size(); i++) {
        std::string line = trim(lines[i]);
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            continue;
        }
        std::string where = source_name + ":" + std::to_string(i + 1);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw parse_error(where + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw parse_error(where + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw parse_error(where + ": empty key");
        }
        if (section.empty()) {
            throw parse_error(where + ": key outside any [section]");
        }
        try {
            cfg.set(section + "." + key, value);
        } catch (const validation_error & e) {
            throw validation_error(where + ": " + e.what());
        }
    }
    return cfg;
}

run_config load_config(const std::string & path) {
    return parse_config(read_file(path), path);
}

}  // namespace pv
