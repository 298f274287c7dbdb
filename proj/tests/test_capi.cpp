#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pivotal.h"

using nlohmann::json;

// takes ownership of a char* out parameter and frees it with pv_string_free
struct owned {
    char * p = nullptr;
    ~owned() { pv_string_free(p); }
    std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

struct owned_config {
    pv_config * cfg = nullptr;
    ~owned_config() { pv_config_free(cfg); }
};

struct owned_index {
    pv_index * idx = nullptr;
    ~owned_index() { pv_index_free(idx); }
};

static void write_file(const std::string & path, const std::string & content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

static std::string read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

static const char * SIM_SPEC = R"({"start":"a","max_len":4,"states":{"a":{"answer":"7"}}})";

TEST_CASE("version and error plumbing") {
    CHECK(std::strcmp(pv_version(), "0.1.0") == 0);
    CHECK(pv_last_error() != nullptr);
    pv_string_free(nullptr);
}

TEST_CASE("config lifecycle over the C boundary") {
    owned_config c;
    REQUIRE(pv_config_default(&c.cfg) == PV_OK);

    owned v;
    REQUIRE(pv_config_get(c.cfg, "pts.n_rollouts", &v.p) == PV_OK);
    CHECK(v.str() == "64");

    REQUIRE(pv_config_set(c.cfg, "pts.p_gap", "0.25") == PV_OK);
    owned gap;
    REQUIRE(pv_config_get(c.cfg, "pts.p_gap", &gap.p) == PV_OK);
    CHECK(gap.str() == std::to_string(0.25));

    CHECK(pv_config_set(c.cfg, "pts.made_up", "1") == PV_ERR_VALIDATION);
    CHECK(std::string(pv_last_error()).find("unknown key") != std::string::npos);
    owned none;
    CHECK(pv_config_get(c.cfg, "nope.nope", &none.p) == PV_ERR_VALIDATION);
    CHECK(pv_config_set(nullptr, "pts.p_gap", "0.5") == PV_ERR_VALIDATION);

    REQUIRE(pv_config_set(c.cfg, "provider.judge.kind", "replay") == PV_OK);
    owned kind;
    REQUIRE(pv_config_get(c.cfg, "provider.judge.kind", &kind.p) == PV_OK);
    CHECK(kind.str() == "replay");
    owned missing_role;
    CHECK(pv_config_get(c.cfg, "provider.ghost.kind", &missing_role.p) == PV_ERR_VALIDATION);
}

TEST_CASE("config files load and reject malformed input") {
    write_file("capi_cfg.ini", "[pts]\nn_rollouts = 9\n");
    owned_config c;
    REQUIRE(pv_config_load("capi_cfg.ini", &c.cfg) == PV_OK);
    owned v;
    REQUIRE(pv_config_get(c.cfg, "pts.n_rollouts", &v.p) == PV_OK);
    CHECK(v.str() == "9");

    write_file("capi_bad.ini", "stray line without equals\n");
    owned_config bad;
    CHECK(pv_config_load("capi_bad.ini", &bad.cfg) == PV_ERR_PARSE);

    owned_config missing;
    CHECK(pv_config_load("capi_does_not_exist.ini", &missing.cfg) != PV_OK);
    std::remove("capi_cfg.ini");
    std::remove("capi_bad.ini");
}

TEST_CASE("f1 and amc scoring cross the boundary intact") {
    double f1 = 0.0;
    REQUIRE(pv_eval_f1(6, 94, 0, &f1) == PV_OK);
    CHECK(std::fabs(f1 - 0.0600) < 1e-4);
    REQUIRE(pv_eval_f1(3, 3, 94, &f1) == PV_OK);
    CHECK(std::fabs(f1 - 0.0566) < 1e-4);
    CHECK(pv_eval_f1(0, 0, 0, &f1) == PV_ERR_VALIDATION);

    std::string all_c(25, 'C');
    std::string all_blank(25, '-');
    double score = 0.0;
    REQUIRE(pv_amc_score(all_c.c_str(), all_c.c_str(), &score) == PV_OK);
    CHECK(score == 150.0);
    REQUIRE(pv_amc_score(all_blank.c_str(), all_c.c_str(), &score) == PV_OK);
    CHECK(score == 37.5);
    CHECK(pv_amc_score("CC", all_c.c_str(), &score) == PV_ERR_VALIDATION);
}

TEST_CASE("amc prompt and choice extraction") {
    owned prompt;
    REQUIRE(pv_amc_prompt("How many?", R"(["10","20","30","40","50"])", &prompt.p) == PV_OK);
    CHECK(prompt.str().find("(C) 30") != std::string::npos);
    CHECK(prompt.str().find("How many?") != std::string::npos);

    owned bad;
    CHECK(pv_amc_prompt("q", R"(["1","2"])", &bad.p) == PV_ERR_VALIDATION);
    CHECK(pv_amc_prompt("q", "not json [", &bad.p) == PV_ERR_PARSE);

    char choice = 0;
    REQUIRE(pv_extract_choice("so the answer is \\boxed{B}", &choice) == PV_OK);
    CHECK(choice == 'B');
    REQUIRE(pv_extract_choice("no idea", &choice) == PV_OK);
    CHECK(choice == '-');
}

TEST_CASE("mixture epochs as json") {
    json plan = {{"horizon_tokens", 10e12},
                 {"sources", json::array(
                                 {json{{"name", "web"}, {"fraction", 0.15}, {"unique_tokens", 1.3e12}},
                                  json{{"name", "web rewrites"}, {"fraction", 0.15}, {"unique_tokens", 290e9}},
                                  json{{"name", "synthetic"}, {"fraction", 0.40}, {"unique_tokens", 290e9}},
                                  json{{"name", "code data"}, {"fraction", 0.20}, {"unique_tokens", 820e9}},
                                  json{{"name", "acquired sources"}, {"fraction", 0.10}, {"unique_tokens", 580e9}}})}};
    owned out;
    REQUIRE(pv_mixture_epochs(plan.dump().c_str(), &out.p) == PV_OK);
    json epochs = json::parse(out.str());
    CHECK(std::round(epochs["web"].get<double>() * 10) / 10 == 1.2);
    CHECK(std::round(epochs["web rewrites"].get<double>() * 10) / 10 == 5.2);
    CHECK(std::round(epochs["synthetic"].get<double>() * 10) / 10 == 13.8);
    CHECK(std::round(epochs["code data"].get<double>() * 10) / 10 == 2.4);
    CHECK(std::round(epochs["acquired sources"].get<double>() * 10) / 10 == 1.7);

    plan["sources"][0]["fraction"] = 0.05;  // sum now 0.9
    owned bad;
    CHECK(pv_mixture_epochs(plan.dump().c_str(), &bad.p) == PV_ERR_VALIDATION);
    CHECK(pv_mixture_epochs("{", &bad.p) == PV_ERR_PARSE);
}

TEST_CASE("chatml render and parse round trip") {
    json messages = json::array({json{{"role", "user"}, {"content", "hi"}},
                                 json{{"role", "assistant"}, {"content", "hello"}}});
    owned text;
    REQUIRE(pv_render_chatml(messages.dump().c_str(), 0, &text.p) == PV_OK);
    owned back;
    REQUIRE(pv_parse_chatml(text.p, &back.p) == PV_OK);
    CHECK(json::parse(back.str()) == messages);

    owned stub;
    REQUIRE(pv_render_chatml(R"([{"role":"user","content":"hi"}])", 1, &stub.p) == PV_OK);
    std::string tail = "<|im_start|>assistant<|im_sep|>";
    REQUIRE(stub.str().size() >= tail.size());
    CHECK(stub.str().substr(stub.str().size() - tail.size()) == tail);

    owned bad;
    CHECK(pv_parse_chatml("<|im_end|>orphan", &bad.p) == PV_ERR_PARSE);
    CHECK(pv_render_chatml(R"([{"role":"wizard","content":"hi"}])", 0, &bad.p) ==
          PV_ERR_VALIDATION);
}

TEST_CASE("token normalization and plurality filtering") {
    owned toks;
    REQUIRE(pv_normalize_tokens("The cat, the CAT ran 1.8 miles", &toks.p) == PV_OK);
    CHECK(json::parse(toks.str()) ==
          json::array({"the", "cat", "the", "cat", "ran", "1", "8", "miles"}));

    owned bundle;
    REQUIRE(pv_plurality_filter("q", R"(["7","8","7.0","8","8"])", &bundle.p) == PV_OK);
    json b = json::parse(bundle.str());
    CHECK(b["decision"] == "keep");
    CHECK(b["plurality_answer"] == "8");
    CHECK(b["plurality_count"] == 3);

    owned bad;
    CHECK(pv_plurality_filter("q", "{}", &bad.p) == PV_ERR_VALIDATION);
    CHECK(pv_plurality_filter("q", "[1, 2]", &bad.p) == PV_ERR_VALIDATION);
}

TEST_CASE("fim carving over the C boundary") {
    const char * doc = "def f():\n    a = 1\n    b = 2\n    c = 3\nprint(f())\n";
    owned out;
    REQUIRE(pv_fim_carve(doc, "code", 5, &out.p) == PV_OK);
    REQUIRE(out.p != nullptr);
    json ex = json::parse(out.str());
    CHECK(ex["policy"] == "code");
    CHECK(ex["context_before"].get<std::string>() + ex["ground_truth"].get<std::string>() +
              ex["context_after"].get<std::string>() ==
          doc);

    owned none;
    REQUIRE(pv_fim_carve("flat\ntext\n", "code", 5, &none.p) == PV_OK);
    CHECK(none.p == nullptr);

    owned bad;
    CHECK(pv_fim_carve(doc, "poetry", 5, &bad.p) == PV_ERR_VALIDATION);
}

TEST_CASE("decontamination index workflow") {
    std::string train = read_file(std::string(PV_TEST_DIR) + "/fixtures/decontam_train_doc.txt");
    std::string test = read_file(std::string(PV_TEST_DIR) + "/fixtures/decontam_test_agieval.txt");
    std::string overlaps =
        read_file(std::string(PV_TEST_DIR) + "/fixtures/decontam_overlap_7grams.txt");

    json rows = json::array({json{{"benchmark", "AGIEval"}, {"id", "oarsmen"}, {"text", test}},
                             json{{"benchmark", "not_a_real_bench"}, {"id", "x"}, {"text", test}}});
    std::string jsonl = rows[0].dump() + "\n" + rows[1].dump() + "\n";
    write_file("capi_bench.jsonl", jsonl);

    owned_config c;
    REQUIRE(pv_config_default(&c.cfg) == PV_OK);
    owned_index idx;
    REQUIRE(pv_index_build(c.cfg, "capi_bench.jsonl", &idx.idx) == PV_OK);

    owned report;
    REQUIRE(pv_index_check(idx.idx, c.cfg, train.c_str(), &report.p) == PV_OK);
    json r = json::parse(report.str());
    CHECK(r["status"] == "contaminated_13");
    CHECK(r["contaminated"] == true);
    CHECK(r["13gram_segment"] == "one of the crew who weighs 53 kg is replaced by a new");
    CHECK(r["13gram_test_dataset"] == "AGIEval");
    CHECK(r["13gram_test_id"] == "oarsmen");
    CHECK(r["7gram_ratio"].get<double>() > 0.25);

    std::vector<std::string> expected_grams;
    {
        size_t start = 0;
        while (start < overlaps.size()) {
            size_t nl = overlaps.find('\n', start);
            if (nl == std::string::npos) nl = overlaps.size();
            if (nl > start) expected_grams.push_back(overlaps.substr(start, nl - start));
            start = nl + 1;
        }
    }
    std::sort(expected_grams.begin(), expected_grams.end());
    CHECK(r["7gram_overlaps"] == json(expected_grams));  // reports list overlaps sorted

    REQUIRE(pv_index_save(idx.idx, "capi_index.bin") == PV_OK);
    owned_index loaded;
    REQUIRE(pv_index_load("capi_index.bin", &loaded.idx) == PV_OK);
    owned report2;
    REQUIRE(pv_index_check(loaded.idx, c.cfg, train.c_str(), &report2.p) == PV_OK);
    CHECK(report2.str() == report.str());

    owned_index missing;
    CHECK(pv_index_load("capi_no_such_index.bin", &missing.idx) != PV_OK);
    std::remove("capi_bench.jsonl");
    std::remove("capi_index.bin");
}

TEST_CASE("pipeline runs through the C API") {
    write_file("capi_spec.json", SIM_SPEC);
    owned_config c;
    REQUIRE(pv_config_default(&c.cfg) == PV_OK);
    REQUIRE(pv_config_set(c.cfg, "provider.simulator_spec", "capi_spec.json") == PV_OK);
    REQUIRE(pv_config_set(c.cfg, "decontam.allowed_min_frequency", "2") == PV_OK);
    REQUIRE(pv_config_set(c.cfg, "run.threads", "1") == PV_OK);

    // 13 shared words appear in two documents, so one allowed 13-gram comes out
    std::string shared = "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu";
    json docs = json::array({json{{"id", "d1"}, {"text", shared + " tail one"}},
                             json{{"id", "d2"}, {"text", shared + " other tail"}},
                             json{{"id", "d3"}, {"text", "nothing in common here at all"}}});
    std::string docs_jsonl;
    for (const json & d : docs) docs_jsonl += d.dump() + "\n";
    write_file("capi_docs.jsonl", docs_jsonl);

    owned stats;
    REQUIRE(pv_run_build_allowed(c.cfg, "capi_docs.jsonl", "capi_allowed.txt", &stats.p) == PV_OK);
    json s = json::parse(stats.str());
    CHECK(s["rows_in"] == 3);
    CHECK(s["rows_out"].get<int>() >= 1);
    std::string allowed = read_file("capi_allowed.txt");
    CHECK(allowed.find("alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu") !=
          std::string::npos);

    json questions = json::array({json{{"id", "q1"}, {"question", "pick a number"}}});
    write_file("capi_questions.jsonl", questions[0].dump() + "\n");
    owned pstats;
    REQUIRE(pv_run_plurality_filter(c.cfg, "capi_questions.jsonl", "capi_bundles.jsonl",
                                    &pstats.p) == PV_OK);
    json ps = json::parse(pstats.str());
    CHECK(ps["rows_in"] == 1);
    CHECK(ps["rows_out"] == 1);
    CHECK(ps["dropped"] == 1);  // every sample answers "7", so the question is too easy
    json bundle = json::parse(read_file("capi_bundles.jsonl"));
    CHECK(bundle["decision"] == "discard_too_easy");
    CHECK(bundle["plurality_answer"] == "7");

    CHECK(pv_run_build_allowed(c.cfg, "capi_absent.jsonl", "capi_allowed.txt", nullptr) != PV_OK);

    std::remove("capi_spec.json");
    std::remove("capi_docs.jsonl");
    std::remove("capi_allowed.txt");
    std::remove("capi_questions.jsonl");
    std::remove("capi_bundles.jsonl");
}
