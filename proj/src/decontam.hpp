#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "config.hpp"
#include "jsonl.hpp"

namespace pv {

// casefold, non-alphanumeric to space, split; "1.8" becomes "1","8"
std::vector<std::string> normalize_tokens(const std::string & text);

// distinct n-grams joined with single spaces, in first-occurrence order
std::vector<std::string> extract_ngrams(const std::vector<std::string> & tokens, int n);

struct benchmark_test {
    std::string benchmark;
    std::string id;
    std::string text;
};

struct ngram_index {
    std::vector<benchmark_test> tests;
    std::vector<std::vector<std::string>> grams13;  // per test, sorted
    std::vector<std::vector<std::string>> grams7;   // per test, sorted
    std::unordered_map<std::string, std::vector<int>> inverted13;  // gram -> test indices
    std::unordered_map<std::string, std::vector<int>> inverted7;

    size_t test_count() const { return tests.size(); }
};

ngram_index build_index(std::vector<benchmark_test> tests);
void save_index(const ngram_index & index, const std::string & path);
ngram_index load_index(const std::string & path);

// document frequency over the corpus, inclusive bound
std::set<std::string> build_allowed_13grams(const std::vector<std::string> & documents,
                                            uint64_t min_frequency);

// allowed-list file: one 13-gram per line, blank lines skipped; empty path
// means no allowed list
std::set<std::string> load_allowed_file(const std::string & path);

struct matched_test_ref {
    std::string benchmark;
    std::string id;
    std::string text;
};

struct ngram_report {
    std::string status = "clean";  // contaminated_13 | contaminated_7 | partial_7 | clean
    std::optional<matched_test_ref> test_13;
    std::string segment_13;
    std::optional<matched_test_ref> test_7;       // max-ratio test
    std::vector<std::string> overlap_7grams;      // sorted
    double ratio_7 = 0.0;

    bool contaminated() const { return status == "contaminated_13" || status == "contaminated_7"; }
};

ngram_report check_contamination(const std::string & train_doc, const ngram_index & index,
                                 const std::set<std::string> & allowed,
                                 const decontam_settings & cfg);

json report_to_json(const ngram_report & report, const std::string & train_id,
                    const std::string & train_dataset);

}  // namespace pv
