#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "common.hpp"
#include "decontam.hpp"

using namespace pv;
namespace fs = std::filesystem;

static std::string test_dir() { return PV_TEST_DIR; }

static std::string words(int from, int count, const std::string & stem = "w") {
    std::vector<std::string> parts;
    for (int i = 0; i < count; i++) parts.push_back(stem + std::to_string(from + i));
    return join(parts, " ");
}

// ==== normalization ====

TEST_CASE("normalize_tokens casefolds and strips punctuation to spaces") {
    CHECK(normalize_tokens("The QUICK, brown-fox!") ==
          std::vector<std::string>{"the", "quick", "brown", "fox"});
    CHECK(normalize_tokens("increased by 1.8 kg") ==
          std::vector<std::string>{"increased", "by", "1", "8", "kg"});
    CHECK(normalize_tokens("a\tb\nc") == std::vector<std::string>{"a", "b", "c"});
    CHECK(normalize_tokens("naïve café") == std::vector<std::string>{"na", "ve", "caf"});
    CHECK(normalize_tokens("x2 3y") == std::vector<std::string>{"x2", "3y"});
    CHECK(normalize_tokens("!!!").empty());
    CHECK(normalize_tokens("").empty());
}

TEST_CASE("extract_ngrams yields distinct grams in first occurrence order") {
    std::vector<std::string> tokens = {"a", "b", "a", "b", "a"};
    CHECK(extract_ngrams(tokens, 2) == std::vector<std::string>{"a b", "b a"});
    CHECK(extract_ngrams(tokens, 5) == std::vector<std::string>{"a b a b a"});
    CHECK(extract_ngrams(tokens, 6).empty());
    CHECK(extract_ngrams({}, 3).empty());
}

// ==== index ====

static ngram_index two_test_index() {
    std::vector<benchmark_test> tests;
    tests.push_back({"bench_a", "t1", words(0, 20)});
    tests.push_back({"bench_b", "t2", words(10, 20)});
    return build_index(std::move(tests));
}

TEST_CASE("build_index records per test grams and inverted postings") {
    ngram_index index = two_test_index();
    CHECK(index.test_count() == 2);
    CHECK(index.grams13[0].size() == 8);   // 20 tokens -> 8 distinct 13-grams
    CHECK(index.grams7[0].size() == 14);
    CHECK(std::is_sorted(index.grams13[0].begin(), index.grams13[0].end()));

    // the overlap region w10..w19 produces shared 7-grams listed for both tests
    std::string shared = to_lower(words(10, 7));
    REQUIRE(index.inverted7.count(shared) == 1);
    CHECK(index.inverted7.at(shared) == std::vector<int>{0, 1});
}

TEST_CASE("index save and load round trips reports") {
    ngram_index index = two_test_index();
    fs::path dir = fs::temp_directory_path() / "pv_decontam_index";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::path path = dir / "index.json";
    save_index(index, path.string());
    ngram_index back = load_index(path.string());

    decontam_settings cfg;
    std::string doc = words(0, 15) + " unrelated tail text here";
    json a = report_to_json(check_contamination(doc, index, {}, cfg), "d1", "train");
    json b = report_to_json(check_contamination(doc, back, {}, cfg), "d1", "train");
    CHECK(a == b);
    fs::remove_all(dir);
}

// ==== contamination decisions ====

TEST_CASE("a 13-gram hit marks the document contaminated_13") {
    ngram_index index = two_test_index();
    decontam_settings cfg;
    std::string doc = "intro words then " + words(0, 13) + " closing remark";
    ngram_report report = check_contamination(doc, index, {}, cfg);
    CHECK(report.status == "contaminated_13");
    CHECK(report.contaminated());
    REQUIRE(report.test_13.has_value());
    CHECK(report.test_13->benchmark == "bench_a");
    CHECK(report.test_13->id == "t1");
    CHECK(report.segment_13 == to_lower(words(0, 13)));
}

TEST_CASE("allowed grams suppress the 13-gram verdict") {
    ngram_index index = two_test_index();
    decontam_settings cfg;
    std::string doc = words(0, 13);
    std::set<std::string> allowed = {to_lower(words(0, 13))};
    ngram_report report = check_contamination(doc, index, allowed, cfg);
    CHECK(report.status != "contaminated_13");
    // 7-gram overlap is still visible: every 7-gram of the doc hits test 1
    CHECK(report.ratio_7 == 1.0);
    CHECK(report.status == "contaminated_7");
}

TEST_CASE("the reported segment prefers strong boundaries") {
    std::string text =
        "of the crew members rowed hard across nine long miles that day quietly going home";
    std::vector<benchmark_test> tests;
    tests.push_back({"bench", "t", text});
    ngram_index index = build_index(std::move(tests));
    decontam_settings cfg;
    // three hits; the first two start on stopwords ('of', 'the'), the third
    // starts and ends on content words
    ngram_report report = check_contamination(text, index, {}, cfg);
    CHECK(report.status == "contaminated_13");
    CHECK(report.segment_13 ==
          "crew members rowed hard across nine long miles that day quietly going home");
}

TEST_CASE("segment falls back to the first hit when every boundary is weak") {
    std::vector<benchmark_test> tests;
    std::string text = "of the one two three four five six seven eight nine in the";
    tests.push_back({"bench", "t", text});
    ngram_index index = build_index(std::move(tests));
    decontam_settings cfg;
    ngram_report report = check_contamination(text, index, {}, cfg);
    CHECK(report.status == "contaminated_13");
    CHECK(report.segment_13 == "of the one two three four five six seven eight nine in the");
}

TEST_CASE("7-gram ratio thresholds split contaminated, partial, clean") {
    std::vector<benchmark_test> tests;
    tests.push_back({"bench", "t", words(0, 26)});  // 20 distinct 7-grams
    ngram_index index = build_index(std::move(tests));
    decontam_settings cfg;  // info 0.25, contaminated 0.45

    // two disjoint 12-token shared runs (no 13-gram can fire): 6 + 6 shared
    // 7-grams out of the doc's 20, min(20, 20) = 20, ratio 0.6
    std::string doc = words(0, 12) + " " + words(300, 2) + " " + words(14, 12);
    ngram_report heavy = check_contamination(doc, index, {}, cfg);
    CHECK(heavy.status == "contaminated_7");
    CHECK(heavy.ratio_7 == doctest::Approx(0.6).epsilon(1e-12));
    REQUIRE(heavy.test_7.has_value());
    CHECK(heavy.test_7->id == "t");
    CHECK(heavy.overlap_7grams.size() == 12);
    CHECK(std::is_sorted(heavy.overlap_7grams.begin(), heavy.overlap_7grams.end()));

    // one 12-token run: 6 shared 7-grams over 18, ratio ~0.333, partial band
    std::string partial_doc = words(0, 12) + " " + words(300, 12);
    ngram_report partial = check_contamination(partial_doc, index, {}, cfg);
    CHECK(partial.status == "partial_7");
    CHECK_FALSE(partial.contaminated());

    // 9-token run: 3 shared 7-grams over 18, ratio ~0.167, clean
    std::string clean_doc = words(0, 9) + " " + words(300, 15);
    ngram_report clean = check_contamination(clean_doc, index, {}, cfg);
    CHECK(clean.status == "clean");
    CHECK(clean.ratio_7 > 0.0);

    ngram_report nothing = check_contamination(words(200, 30), index, {}, cfg);
    CHECK(nothing.status == "clean");
    CHECK(nothing.ratio_7 == 0.0);
    CHECK_FALSE(nothing.test_7.has_value());
}

TEST_CASE("short documents with no 7-grams are clean") {
    ngram_index index = two_test_index();
    decontam_settings cfg;
    ngram_report report = check_contamination("w0 w1 w2", index, {}, cfg);
    CHECK(report.status == "clean");
    CHECK(report.ratio_7 == 0.0);
}

TEST_CASE("the max ratio test wins the 7-gram attribution, first on ties") {
    std::vector<benchmark_test> tests;
    tests.push_back({"bench_a", "big", words(0, 40)});    // 34 7-grams
    tests.push_back({"bench_b", "small", words(0, 13)});  // 7 7-grams
    ngram_index index = build_index(std::move(tests));
    decontam_settings cfg;
    std::string doc = words(0, 12);  // 6 7-grams, all shared with both tests
    ngram_report report = check_contamination(doc, index, {}, cfg);
    // 6 / min(6, 34) and 6 / min(6, 7) are both 1.0; the earlier test wins
    REQUIRE(report.test_7.has_value());
    CHECK(report.test_7->id == "big");
    CHECK(report.ratio_7 == 1.0);
    CHECK(report.status == "contaminated_7");

    // a doc sharing more with the smaller test attributes there
    std::string doc2 = words(5, 12);  // still 6 grams against 'big'
    ngram_report r2 = check_contamination(doc2, index, {}, cfg);
    // against 'small' (tokens w0..w12) only the w5..w11 and w6..w12 grams hit:
    // 2 / min(6, 7) = 0.333 loses to 6 / min(6, 34) = 1.0
    CHECK(r2.test_7->id == "big");
}

// ==== allowed list ====

TEST_CASE("build_allowed_13grams uses document frequency with an inclusive bound") {
    std::string common = words(0, 13);
    std::string rare = words(50, 13);
    std::vector<std::string> docs = {common + " filler one", common + " filler two",
                                     common + " filler three", rare};
    std::set<std::string> allowed = build_allowed_13grams(docs, 3);
    CHECK(allowed.count(to_lower(common)) == 1);
    CHECK(allowed.count(to_lower(rare)) == 0);

    // repeats inside one document count once
    std::vector<std::string> repeat_docs = {common + " " + common, rare};
    CHECK(build_allowed_13grams(repeat_docs, 2).empty());
}

TEST_CASE("load_allowed_file reads one gram per line and skips blanks") {
    fs::path dir = fs::temp_directory_path() / "pv_decontam_allowed";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::path p = dir / "allowed.txt";
    atomic_write_file(p.string(), "alpha beta gamma\n\n  delta epsilon  \n");
    std::set<std::string> allowed = load_allowed_file(p.string());
    CHECK(allowed == std::set<std::string>{"alpha beta gamma", "delta epsilon"});
    CHECK(load_allowed_file("").empty());
    fs::remove_all(dir);
}

// ==== report json ====

TEST_CASE("report_to_json carries identity, status, and overlap evidence") {
    ngram_index index = two_test_index();
    decontam_settings cfg;
    ngram_report report = check_contamination(words(0, 14), index, {}, cfg);
    json j = report_to_json(report, "doc-9", "orca-math");
    CHECK(j["id"] == "doc-9");
    CHECK(j["dataset"] == "orca-math");
    CHECK(j["status"] == "contaminated_13");
    CHECK(j["contaminated"] == true);
    CHECK(j["13gram_contaminated"] == true);
    CHECK(j["13gram_segment"] == report.segment_13);
    CHECK(j["13gram_test_dataset"] == "bench_a");
    CHECK(j["7gram_ratio"] == report.ratio_7);
    CHECK(j["7gram_overlaps"].size() == report.overlap_7grams.size());
}

// ==== the worked example ====

TEST_CASE("the oarsmen training document is flagged against its benchmark twin") {
    std::string train = read_file(test_dir() + "/fixtures/decontam_train_doc.txt");
    std::string test = read_file(test_dir() + "/fixtures/decontam_test_agieval.txt");

    std::vector<benchmark_test> tests;
    tests.push_back({"AGIEval", "oarsmen-1", test});
    ngram_index index = build_index(std::move(tests));
    decontam_settings cfg;
    ngram_report report = check_contamination(train, index, {}, cfg);

    CHECK(report.status == "contaminated_13");
    CHECK(report.segment_13 == "one of the crew who weighs 53 kg is replaced by a new");

    std::set<std::string> expected;
    for (const std::string & line : read_lines(test_dir() + "/fixtures/decontam_overlap_7grams.txt")) {
        expected.insert(line);
    }
    std::set<std::string> got(report.overlap_7grams.begin(), report.overlap_7grams.end());
    CHECK(got == expected);
    CHECK(report.overlap_7grams.size() == 15);

    size_t train7 = extract_ngrams(normalize_tokens(train), 7).size();
    size_t test7 = extract_ngrams(normalize_tokens(test), 7).size();
    CHECK(report.ratio_7 ==
          doctest::Approx(15.0 / std::min(train7, test7)).epsilon(1e-12));
}
