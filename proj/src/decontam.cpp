#include "decontam.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "common.hpp"

namespace pv {

std::vector<std::string> normalize_tokens(const std::string & text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (c >= 'A' && c <= 'Z') {
            cleaned += (char) (c - 'A' + 'a');
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cleaned += (char) c;
        } else {
            cleaned += ' ';
        }
    }
    return split_whitespace(cleaned);
}

std::vector<std::string> extract_ngrams(const std::vector<std::string> & tokens, int n) {
    if (n < 1) {
        throw validation_error("extract_ngrams: n must be >= 1");
    }
    std::vector<std::string> grams;
    if (tokens.size() < (size_t) n) {
        return grams;
    }
    std::unordered_set<std::string> seen;
    for (size_t i = 0; i + n <= tokens.size(); i++) {
        std::string gram = tokens[i];
        for (size_t j = 1; j < (size_t) n; j++) {
            gram += ' ';
            gram += tokens[i + j];
        }
        if (seen.insert(gram).second) {
            grams.push_back(std::move(gram));
        }
    }
    return grams;
}

ngram_index build_index(std::vector<benchmark_test> tests) {
    ngram_index index;
    index.tests = std::move(tests);
    index.grams13.resize(index.tests.size());
    index.grams7.resize(index.tests.size());
    for (size_t i = 0; i < index.tests.size(); i++) {
        std::vector<std::string> tokens = normalize_tokens(index.tests[i].text);
        index.grams13[i] = extract_ngrams(tokens, 13);
        index.grams7[i] = extract_ngrams(tokens, 7);
        std::sort(index.grams13[i].begin(), index.grams13[i].end());
        std::sort(index.grams7[i].begin(), index.grams7[i].end());
        for (const std::string & gram : index.grams13[i]) {
            index.inverted13[gram].push_back((int) i);
        }
        for (const std::string & gram : index.grams7[i]) {
            index.inverted7[gram].push_back((int) i);
        }
    }
    return index;
}

void save_index(const ngram_index & index, const std::string & path) {
    json j;
    j["version"] = 1;
    json tests = json::array();
    for (const benchmark_test & t : index.tests) {
        tests.push_back(json{{"benchmark", t.benchmark}, {"id", t.id}, {"text", t.text}});
    }
    j["tests"] = std::move(tests);
    atomic_write_file(path, j.dump());
}

ngram_index load_index(const std::string & path) {
    std::string raw = read_file(path);
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("tests") || !j["tests"].is_array()) {
        throw parse_error("ngram index file malformed: " + path);
    }
    std::vector<benchmark_test> tests;
    for (const json & t : j["tests"]) {
        tests.push_back({get_string(t, "benchmark", path), get_string(t, "id", path),
                         get_string(t, "text", path)});
    }
    return build_index(std::move(tests));
}

std::set<std::string> build_allowed_13grams(const std::vector<std::string> & documents,
                                            uint64_t min_frequency) {
    std::unordered_map<std::string, uint64_t> doc_freq;
    for (const std::string & doc : documents) {
        for (const std::string & gram : extract_ngrams(normalize_tokens(doc), 13)) {
            doc_freq[gram]++;
        }
    }
    std::set<std::string> allowed;
    for (const auto & [gram, freq] : doc_freq) {
        if (freq >= min_frequency) {
            allowed.insert(gram);
        }
    }
    return allowed;
}

std::set<std::string> load_allowed_file(const std::string & path) {
    std::set<std::string> allowed;
    if (path.empty()) {
        return allowed;
    }
    for (const std::string & line : read_lines(path)) {
        std::string gram = trim(line);
        if (!gram.empty()) {
            allowed.insert(gram);
        }
    }
    return allowed;
}

// ==== 13-gram segment choice ====

namespace {

const std::unordered_set<std::string> & boundary_stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",    "and",  "are",  "as",   "at",    "be",   "but",  "by",   "for",
        "if",   "in",    "into", "is",   "it",   "no",    "not",  "of",   "on",   "or",
        "such", "that",  "the",  "their", "then", "there", "these", "they", "this", "to",
        "was",  "were",  "will", "with",  "when", "which", "who",  "whom", "what", "where",
        "why",  "how"};
    return words;
}

bool strong_boundary(const std::string & token) {
    for (char c : token) {
        if (c < 'a' || c > 'z') {
            return false;
        }
    }
    return boundary_stopwords().count(token) == 0;
}

// prefer a reported segment that starts and ends on content words
bool strong_segment(const std::string & gram) {
    size_t first_end = gram.find(' ');
    size_t last_start = gram.rfind(' ');
    if (first_end == std::string::npos) {
        return strong_boundary(gram);
    }
    return strong_boundary(gram.substr(0, first_end)) &&
           strong_boundary(gram.substr(last_start + 1));
}

}  // namespace

ngram_report check_contamination(const std::string & train_doc, const ngram_index & index,
                                 const std::set<std::string> & allowed,
                                 const decontam_settings & cfg) {
    ngram_report report;
    std::vector<std::string> tokens = normalize_tokens(train_doc);

    std::vector<std::string> train13 = extract_ngrams(tokens, 13);
    std::vector<std::string> hits;
    for (const std::string & gram : train13) {
        if (index.inverted13.count(gram) != 0 && allowed.count(gram) == 0) {
            hits.push_back(gram);
        }
    }
    if (!hits.empty()) {
        report.status = "contaminated_13";
        const std::string * chosen = &hits[0];
        for (const std::string & gram : hits) {
            if (strong_segment(gram)) {
                chosen = &gram;
                break;
            }
        }
        report.segment_13 = *chosen;
        int test_id = index.inverted13.at(*chosen).front();
        const benchmark_test & t = index.tests[test_id];
        report.test_13 = matched_test_ref{t.benchmark, t.id, t.text};
    }

    std::vector<std::string> train7 = extract_ngrams(tokens, 7);
    std::map<int, int> overlap_counts;
    for (const std::string & gram : train7) {
        auto it = index.inverted7.find(gram);
        if (it == index.inverted7.end()) {
            continue;
        }
        for (int test_id : it->second) {
            overlap_counts[test_id]++;
        }
    }

    double max_ratio = 0.0;
    int max_test = -1;
    for (const auto & [test_id, count] : overlap_counts) {
        size_t denom = std::min(train7.size(), index.grams7[test_id].size());
        double ratio = denom == 0 ? 0.0 : (double) count / (double) denom;
        if (ratio > max_ratio) {
            max_ratio = ratio;
            max_test = test_id;
        }
    }
    report.ratio_7 = max_ratio;
    if (max_test >= 0) {
        const benchmark_test & t = index.tests[max_test];
        report.test_7 = matched_test_ref{t.benchmark, t.id, t.text};
        std::vector<std::string> sorted_train7 = train7;
        std::sort(sorted_train7.begin(), sorted_train7.end());
        std::set_intersection(sorted_train7.begin(), sorted_train7.end(),
                              index.grams7[max_test].begin(), index.grams7[max_test].end(),
                              std::back_inserter(report.overlap_7grams));
    }

    if (report.status != "contaminated_13") {
        if (max_ratio >= cfg.contaminated_7gram_threshold) {
            report.status = "contaminated_7";
        } else if (max_ratio > cfg.info_7gram_threshold) {
            report.status = "partial_7";
        } else {
            report.status = "clean";
        }
    }
    return report;
}

json report_to_json(const ngram_report & report, const std::string & train_id,
                    const std::string & train_dataset) {
    json j;
    j["id"] = train_id;
    j["dataset"] = train_dataset;
    j["contaminated"] = report.contaminated();
    j["status"] = report.status;
    j["13gram_contaminated"] = report.status == "contaminated_13";
    if (report.test_13) {
        j["13gram_segment"] = report.segment_13;
        j["13gram_test"] = report.test_13->text;
        j["13gram_test_dataset"] = report.test_13->benchmark;
        j["13gram_test_id"] = report.test_13->id;
    }
    if (report.test_7) {
        j["7gram_test"] = report.test_7->text;
        j["7gram_test_dataset"] = report.test_7->benchmark;
        j["7gram_test_id"] = report.test_7->id;
    }
    j["7gram_overlaps"] = report.overlap_7grams;
    j["7gram_ratio"] = report.ratio_7;
    return j;
}

}  // namespace pv
