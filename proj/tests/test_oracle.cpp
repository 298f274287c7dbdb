#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "chatml.hpp"
#include "common.hpp"
#include "oracle.hpp"
#include "simulator.hpp"

using namespace pv;

// terminal-only machine: every completion is exactly `reply`
static std::unique_ptr<provider> scripted(const std::string & reply, uint64_t seed = 1) {
    json spec = {{"start", "a"},
                 {"max_len", 4},
                 {"states", {{"a", {{"answer", reply}}}}}};
    return make_simulator_provider(parse_simulator_spec(spec.dump(), "scripted"), seed);
}

// ==== answer normalization ====

TEST_CASE("normalize_answer canonicalizes case, spacing, punctuation, numbers") {
    CHECK(normalize_answer("  The  Answer. ") == "the answer");
    CHECK(normalize_answer("42.") == "42");
    CHECK(normalize_answer("42.0") == "42");
    CHECK(normalize_answer("042.50") == "42.5");
    CHECK(normalize_answer("-0") == "0");
    CHECK(normalize_answer("-3.10") == "-3.1");
    CHECK(normalize_answer("x!?") == "x");
    CHECK(normalize_answer("1.2.3") == "1.2.3");
    CHECK(normalize_answer("") == "");
}

TEST_CASE("fast_answer_match accepts key, alternates, and trailing equations") {
    CHECK(fast_answer_match("42", "42.0", {}));
    CHECK(fast_answer_match("The Capital", "the capital.", {}));
    CHECK(fast_answer_match("wrong", "right", {"Wrong"}));
    CHECK(fast_answer_match("so t = 23", "23", {}));
    CHECK(fast_answer_match("a = b = 7.0", "7", {}));
    CHECK_FALSE(fast_answer_match("t = 24", "23", {}));
    CHECK_FALSE(fast_answer_match("", "x", {}));
    CHECK_FALSE(fast_answer_match("x", "", {}));
}

TEST_CASE("extract_answer_text supports all four modes") {
    token_seq response{{{"work work\n", -0.1}, {"final ", -0.1}, {"line", -0.1}}};
    CHECK(extract_answer_text(response, "full") == "work work\nfinal line");
    CHECK(extract_answer_text(response, "final_token") == "line");
    CHECK(extract_answer_text(response, "final_line") == "final line");
    CHECK(extract_answer_text({}, "final_token") == "");
    CHECK(extract_answer_text({}, "final_line") == "");

    token_seq boxed{{{"thus \\boxed{7\\frac{1}{2}} done", -0.1}}};
    CHECK(extract_answer_text(boxed, "boxed") == "7\\frac{1}{2}");
    token_seq two_boxes{{{"\\boxed{1} then \\boxed{2}", -0.1}}};
    CHECK(extract_answer_text(two_boxes, "boxed") == "2");
    CHECK(extract_answer_text(response, "boxed") == "");
    CHECK_THROWS_AS(extract_answer_text(response, "middle_out"), validation_error);
}

TEST_CASE("extract_json_block prefers fences and balances braces") {
    CHECK(extract_json_block("before ```json\n{\"a\": 1}\n``` after").value() == "{\"a\": 1}");
    CHECK(extract_json_block("text {\"a\": {\"b\": 2}} tail").value() == "{\"a\": {\"b\": 2}}");
    CHECK(extract_json_block("quoted brace {\"a\": \"}\"} end").value() == "{\"a\": \"}\"}");
    CHECK_FALSE(extract_json_block("no json at all").has_value());
    CHECK_FALSE(extract_json_block("unbalanced { forever").has_value());
}

// ==== check_answer ====

TEST_CASE("check_answer fast path never consults the judge") {
    auto garbage_judge = scripted("word salad, no json");
    oracle_verdict v = check_answer("q", "42", "42.0", {}, garbage_judge.get(), 0);
    CHECK(v.outcome == verdict::correct);
}

TEST_CASE("check_answer without judge marks mismatches incorrect") {
    oracle_verdict v = check_answer("q", "близко", "far", {});
    CHECK(v.outcome == verdict::incorrect);
    CHECK(v.rationale.find("no judge") != std::string::npos);
}

TEST_CASE("check_answer escalates to the judge verdict") {
    auto yes = scripted("analysis...\n```json\n{\"matches_key\": \"True\"}\n```");
    CHECK(check_answer("q", "7 apples", "seven", {}, yes.get(), 0).outcome == verdict::correct);

    auto no = scripted("{\"matches_key\": \"False\"}");
    CHECK(check_answer("q", "7 apples", "seven", {}, no.get(), 0).outcome == verdict::incorrect);

    auto shrug = scripted("{\"matches_key\": \"Uncertain\"}");
    CHECK(check_answer("q", "7 apples", "seven", {}, shrug.get(), 0).outcome == verdict::uncertain);
}

TEST_CASE("check_answer raises adjudication_error on unusable judges") {
    auto garbage = scripted("word salad, no json");
    CHECK_THROWS_AS(check_answer("q", "a", "b", {}, garbage.get(), 1), adjudication_error);
    auto wrong_field = scripted("{\"verdict\": \"True\"}");
    CHECK_THROWS_AS(check_answer("q", "a", "b", {}, wrong_field.get(), 0), adjudication_error);
}

TEST_CASE("answer check prompt embeds question, submission, key, and alternates") {
    std::string prompt = render_answer_check_prompt("Q?", "resp", "key", {"alt1", "alt2"});
    CHECK(prompt.find("## Original question\n\nQ?") != std::string::npos);
    CHECK(prompt.find("## Submission\n\nresp") != std::string::npos);
    CHECK(prompt.find("## Answer key\n\nkey") != std::string::npos);
    CHECK(prompt.find("### Alternative Answer Forms\n\nalt1\nalt2\n") != std::string::npos);
    CHECK(prompt.find("matches_key") != std::string::npos);
    std::string bare = render_answer_check_prompt("Q?", "resp", "key", {});
    CHECK(bare.find("Alternative Answer Forms") == std::string::npos);
}

// ==== code tests ====

TEST_CASE("run_code_tests passes a correct program and fails a wrong one") {
    sandbox_limits limits{5.0, 256};
    std::vector<code_test> suite = {{"2 3\n", "5"}, {"10 -4\n", "6"}};
    std::string good = "a, b = map(int, input().split())\nprint(a + b)\n";
    CHECK(run_code_tests(good, suite, limits).outcome == verdict::correct);

    std::string bad = "a, b = map(int, input().split())\nprint(a - b)\n";
    oracle_verdict v = run_code_tests(bad, suite, limits);
    CHECK(v.outcome == verdict::incorrect);
    CHECK_FALSE(v.rationale.empty());

    std::string crash = "raise RuntimeError('nope')\n";
    CHECK(run_code_tests(crash, suite, limits).outcome == verdict::incorrect);
}

TEST_CASE("run_code_tests kills runaway programs") {
    sandbox_limits limits{0.5, 256};
    std::vector<code_test> suite = {{"", "never"}};
    CHECK(run_code_tests("while True:\n    pass\n", suite, limits).outcome == verdict::incorrect);
}

TEST_CASE("missing interpreter is an infra_error, not a wrong answer") {
    std::string saved = std::getenv("PATH");
    setenv("PATH", "/definitely/not/a/dir", 1);
    std::vector<code_test> suite = {{"", "x"}};
    CHECK_THROWS_AS(run_python_tests("print('x')", suite, {1.0, 64}), infra_error);
    setenv("PATH", saved.c_str(), 1);
}

// ==== plurality ====

TEST_CASE("plurality_vote forms greedy classes with ties to the earliest") {
    auto eq = normalized_equivalence();
    auto [rep, count] = plurality_vote({"4", "4.0", "5", "four"}, eq);
    CHECK(rep == "4");
    CHECK(count == 2);

    auto [tie_rep, tie_count] = plurality_vote({"a", "b", "b", "a"}, eq);
    CHECK(tie_rep == "a");
    CHECK(tie_count == 2);
}

TEST_CASE("filter_question implements the k-agreement rule") {
    auto eq = normalized_equivalence();
    auto decision = [&](const std::vector<std::string> & answers) {
        return filter_question("q", answers, eq).decision;
    };
    CHECK(decision({"x", "x", "x", "x"}) == filter_decision::discard_too_easy);
    CHECK(decision({"a", "b", "c", "d"}) == filter_decision::discard_inconsistent);
    CHECK(decision({"a", "a", "b", "a"}) == filter_decision::keep);

    question_bundle bundle = filter_question("q", {"7", "8", "7.0", "8", "8"}, eq);
    CHECK(bundle.decision == filter_decision::keep);
    CHECK(bundle.plurality_answer == "8");
    CHECK(bundle.plurality_count == 3);
    CHECK(bundle.answers.size() == 5);
    CHECK(std::string(filter_decision_name(bundle.decision)) == "keep");
}

TEST_CASE("judge_equivalence delegates to check_answer") {
    auto yes = scripted("{\"matches_key\": \"True\"}");
    auto eq = judge_equivalence("q", yes.get(), 0);
    CHECK(eq("half", "fifty percent"));
    CHECK(eq("0.5", "1/2"));

    auto no = scripted("{\"matches_key\": \"False\"}");
    auto neq = judge_equivalence("q", no.get(), 0);
    CHECK(neq("0.5", "0.50"));  // fast path still matches without the judge
    CHECK_FALSE(neq("half", "fifty percent"));
}

// ==== bindings and scorers ====

TEST_CASE("oracle_binding json round trip and validation") {
    json j = {{"type", "answer_key"},
              {"answer_key", "42"},
              {"alternates", json::array({"forty two"})},
              {"extract", "final_line"}};
    oracle_binding b = binding_from_json(j, "row 1");
    CHECK(b.type == "answer_key");
    CHECK(b.answer_key == "42");
    CHECK(b.alternates == std::vector<std::string>{"forty two"});
    CHECK(b.extract == "final_line");
    json back = binding_to_json(b);
    CHECK(binding_from_json(back, "again").answer_key == "42");

    CHECK_THROWS_AS(binding_from_json(json{{"type", "answer_key"}}, "row"), validation_error);
    CHECK_THROWS_AS(binding_from_json(json{{"type", "alchemy"}}, "row"), validation_error);
    CHECK_THROWS_AS(binding_from_json(json{{"type", "code_tests"}}, "row"), validation_error);
    CHECK_THROWS_AS(
        binding_from_json(json{{"type", "fixed_rate"}, {"rate", 1.5}}, "row"), validation_error);
    CHECK_THROWS_AS(
        binding_from_json(json{{"type", "answer_key"}, {"answer_key", "x"}, {"extract", "psychic"}},
                          "row"),
        validation_error);
}

TEST_CASE("answer_key scorer extracts then checks") {
    oracle_binding b;
    b.type = "answer_key";
    b.answer_key = "RIGHT";
    b.extract = "final_token";
    auto scorer = make_scorer(b, "q", nullptr, {});
    CHECK(scorer(token_seq{{{"blah ", -0.1}, {"RIGHT", 0.0}}}, 0));
    CHECK_FALSE(scorer(token_seq{{{"blah ", -0.1}, {"WRONG", 0.0}}}, 0));
    CHECK_FALSE(scorer({}, 0));
}

TEST_CASE("fixed_rate scorer plants exactly floor(n * rate) successes") {
    oracle_binding b;
    b.type = "fixed_rate";
    auto count = [&](double rate, int n) {
        b.rate = rate;
        auto scorer = make_scorer(b, "q", nullptr, {});
        int hits = 0;
        for (int i = 0; i < n; i++) hits += scorer({}, i) ? 1 : 0;
        return hits;
    };
    CHECK(count(0.2, 100) == 20);
    CHECK(count(0.19, 100) == 19);
    CHECK(count(0.8, 100) == 80);
    CHECK(count(0.81, 100) == 81);
    CHECK(count(0.0, 100) == 0);
    CHECK(count(1.0, 100) == 100);
    CHECK(count(1.0 / 3.0, 30) == 10);
}

TEST_CASE("code_tests scorer runs the sandbox") {
    oracle_binding b;
    b.type = "code_tests";
    b.tests = {{"", "7"}};
    oracle_settings settings;
    settings.sandbox_time_s = 5.0;
    settings.sandbox_memory_mb = 256;
    auto scorer = make_scorer(b, "q", nullptr, settings);
    CHECK(scorer(token_seq{{{"print(7)", -0.1}}}, 0));
    CHECK_FALSE(scorer(token_seq{{{"print(8)", -0.1}}}, 0));
}
