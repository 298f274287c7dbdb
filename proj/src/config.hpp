// Run configuration: one INI-style file drives every pipeline. Sections map
// to modules ([pts], [decontam], ...); [provider] names the completion
// source, with [provider.NAME] sections for additional roles such as the
// judge or the reply sources of judge labeling.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pv {

struct provider_settings {
    std::string kind = "simulator";  // simulator | http | replay
    std::string base_url;
    std::string model;
    std::string api_key_env = "PIVOTAL_API_KEY";
    std::string api_style = "chat";  // chat | completion
    std::string simulator_spec;      // path to a simulator spec JSON
    std::string cache_dir;
    std::string cache_mode = "off";  // off | record | replay
    int max_in_flight = 4;
    int max_attempts = 5;
    int backoff_ms = 250;
    int timeout_ms = 30000;
};

struct pts_settings {
    double p_gap = 0.2;
    int n_rollouts = 64;
    double temperature = 1.0;
    int max_tokens = 512;
    int min_support = 3;
    double prefilter_lo = 0.2;
    double prefilter_hi = 0.8;
    int completions_per_query = 4;
};

struct oracle_settings {
    int plurality_k = 8;
    std::string equivalence = "normalized";  // normalized | judge
    double sandbox_time_s = 5.0;
    int sandbox_memory_mb = 768;
    int judge_retries = 2;
};

struct decontam_settings {
    double info_7gram_threshold = 0.25;
    double contaminated_7gram_threshold = 0.45;
    int allowed_min_frequency = 10;
    std::string allowed_file;
    // benchmarks admitted into the index; empty accepts every row
    std::string benchmarks =
        "ARC-Easy,MBPP,phibench,CommonsenseQA,WinoGrande,mcphi,MedQA,MATH,AGIEval,PIQA,"
        "OpenBookQA,HellaSwag,GPQA,mt-bench,MMLUPro,GSM8k,HumanEval,arena_hard,"
        "ARC-Challenge,MMLU";
};

struct refusal_settings {
    double usually_correct = 0.5;  // SFT (question, correct) when accuracy >= this
    double usually_wrong = 0.5;    // SFT (question, refusal) when accuracy < this
    int bogus_quality_floor = 4;
    int n_accuracy_runs = 10;
    int truncate_tokens = 5;
    double temperature = 1.0;
    int max_tokens = 512;
};

struct judge_settings {
    std::string mode = "accuracy";  // accuracy | overall
    int max_retries = 2;
    double temperature = 0.0;
    std::string sources;  // comma list of provider section names
    int max_tokens = 1024;
};

struct fim_settings {
    std::string policy = "code";  // code | prose
    int min_lines = 2;
    int max_lines = 8;
    int n_samples = 8;
    std::string grade_mode = "exact";  // exact | judge
    double temperature = 1.0;
    int max_tokens = 1024;
};

struct eval_settings {
    int amc_generations = 10;
    double amc_temperature = 0.5;
};

struct run_config {
    uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency

    provider_settings provider;
    std::map<std::string, provider_settings> providers;  // extra roles by name

    pts_settings pts;
    oracle_settings oracle;
    decontam_settings decontam;
    refusal_settings refusal;
    judge_settings judge;
    fim_settings fim;
    eval_settings eval;

    // provider for a named role, falling back to the default provider
    const provider_settings & provider_for(const std::string & role) const;

    // worker count with the 0 = auto rule applied
    int effective_threads() const;

    void set(const std::string & dotted_key, const std::string & value);
    std::string get(const std::string & dotted_key) const;

    // throws validation_error naming the first out-of-range field
    void validate() const;
};

// Parses the INI-style config text: [section] headers, key = value lines,
// #-prefixed comment lines. Unknown sections or keys are errors, so typos
// fail loudly.
run_config parse_config(const std::string & text, const std::string & source_name);

run_config load_config(const std::string & path);

std::vector<std::string> split_csv(const std::string & csv);

}  // namespace pv
