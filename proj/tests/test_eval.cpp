#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "common.hpp"
#include "evalmetrics.hpp"
#include "simulator.hpp"

using namespace pv;

static std::unique_ptr<provider> scripted(const std::string & reply, uint64_t seed = 1) {
    json spec = {{"start", "a"}, {"max_len", 4}, {"states", {{"a", {{"answer", reply}}}}}};
    return make_simulator_provider(parse_simulator_spec(spec.dump(), "scripted"), seed);
}

// ==== f1 ====

TEST_CASE("f1 rewards abstention only through precision") {
    // a model that answers everything and is right 6 times out of 100
    CHECK(std::fabs(f1_score(6, 94, 0) - 0.0600) < 1e-4);
    // a model that attempts 6, gets 3, refuses the rest: nearly the same f1
    CHECK(std::fabs(f1_score(3, 3, 94) - 0.0566) < 1e-4);

    CHECK(f1_score(100, 0, 0) == 1.0);
    CHECK(f1_score(0, 50, 50) == 0.0);
    CHECK(f1_score(0, 0, 10) == 0.0);
    CHECK(f1_score(50, 0, 50) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(f1_score(0, 0, 0), validation_error);
}

// ==== amc scoring ====

static std::vector<std::string> filled(const std::string & v) {
    return std::vector<std::string>(25, v);
}

TEST_CASE("amc_score pays 6 per hit and 1.5 per blank") {
    std::vector<std::string> key = filled("C");
    CHECK(amc_score(filled("C"), key) == 150.0);
    CHECK(amc_score(filled("blank"), key) == 37.5);
    CHECK(amc_score(filled("D"), key) == 0.0);

    std::vector<std::string> mixed = key;
    for (int i = 0; i < 10; i++) mixed[i] = "blank";
    for (int i = 10; i < 15; i++) mixed[i] = "A";
    CHECK(amc_score(mixed, key) == 10 * 1.5 + 5 * 0.0 + 10 * 6.0);
}

TEST_CASE("amc_score validates sizes and entries") {
    std::vector<std::string> key = filled("A");
    std::vector<std::string> short_choices(24, "A");
    CHECK_THROWS_AS(amc_score(short_choices, key), validation_error);
    CHECK_THROWS_AS(amc_score(filled("A"), std::vector<std::string>(24, "A")), validation_error);

    std::vector<std::string> bad_key = key;
    bad_key[3] = "blank";  // the key must commit to a letter
    CHECK_THROWS_AS(amc_score(filled("A"), bad_key), validation_error);

    std::vector<std::string> bad_choice = filled("A");
    bad_choice[7] = "F";
    CHECK_THROWS_AS(amc_score(bad_choice, key), validation_error);
}

// ==== amc prompt ====

TEST_CASE("the amc prompt template matches the golden file byte for byte") {
    auto golden = read_file_if_exists(std::string(PV_TEST_DIR) + "/golden/amc_prompt_template.txt");
    REQUIRE(golden.has_value());
    CHECK(std::string(AMC_PROMPT_TEMPLATE) == *golden);
}

TEST_CASE("render_amc_prompt substitutes all six placeholders") {
    std::string prompt =
        render_amc_prompt("What is 2 + 2?", {"1", "2", "3", "4", "5"});
    CHECK(prompt.find("# Question\nWhat is 2 + 2?\n(A) 1\n(B) 2\n(C) 3\n(D) 4\n(E) 5") !=
          std::string::npos);
    CHECK(prompt.find("{{") == std::string::npos);
    CHECK(prompt.find("6 points for each correct answer") != std::string::npos);
    CHECK(prompt.find("\\boxed{blank}") != std::string::npos);
}

// ==== choice extraction ====

TEST_CASE("parse_boxed_choice reads the last boxed letter") {
    CHECK(parse_boxed_choice("the answer is \\boxed{C}").value() == "C");
    CHECK(parse_boxed_choice("\\boxed{A} wait, no: \\boxed{blank}").value() == "blank");
    CHECK(parse_boxed_choice("\\boxed{ B }").value() == "B");
    CHECK_FALSE(parse_boxed_choice("\\boxed{42}").has_value());
    CHECK_FALSE(parse_boxed_choice("\\boxed{\\frac{1}{2}}").has_value());
    CHECK_FALSE(parse_boxed_choice("no box at all").has_value());
}

TEST_CASE("extract_choice prefers the boxed answer and never needs the judge for it") {
    choice_extraction got = extract_choice("steps... \\boxed{D}", nullptr, {}, 0);
    CHECK(got.choice == "D");
    CHECK_FALSE(got.used_judge);
    CHECK(got.warning.empty());

    // unboxed with no judge available degrades to blank
    CHECK(extract_choice("the answer is D", nullptr, {}, 0).choice == "blank");
}

TEST_CASE("extract_choice falls back to the judge for unboxed solutions") {
    auto judge = scripted("C.");
    choice_extraction got = extract_choice("I pick the third option", judge.get(),
                                           {"10", "20", "30", "40", "50"}, 1);
    CHECK(got.choice == "C");
    CHECK(got.used_judge);
    CHECK(got.warning.empty());

    auto lowercase = scripted("b seems right");
    CHECK(extract_choice("hmm", lowercase.get(), {}, 0).choice == "B");

    auto none = scripted("none");
    CHECK(extract_choice("hmm", none.get(), {}, 0).choice == "blank");

    auto boxed_judge = scripted("\\boxed{E}");
    CHECK(extract_choice("hmm", boxed_judge.get(), {}, 0).choice == "E");

    auto garbage = scripted("I cannot tell which");
    choice_extraction bad = extract_choice("hmm", garbage.get(), {}, 1);
    CHECK(bad.choice == "blank");
    CHECK(bad.used_judge);
    CHECK_FALSE(bad.warning.empty());
}

// ==== mixture arithmetic ====

TEST_CASE("mixture_epochs reproduces the planning table at a 10T horizon") {
    mixture_plan plan;
    plan.horizon_tokens = 10e12;
    plan.sources = {{"web", 0.15, 1.3e12},
                    {"web rewrites", 0.15, 290e9},
                    {"synthetic", 0.40, 290e9},
                    {"code data", 0.20, 820e9},
                    {"acquired sources", 0.10, 580e9}};

    auto epochs = mixture_epochs(plan);
    REQUIRE(epochs.size() == 5);
    std::vector<double> expected = {1.2, 5.2, 13.8, 2.4, 1.7};
    for (size_t i = 0; i < 5; i++) {
        CHECK(epochs[i].first == plan.sources[i].name);
        double rounded = std::round(epochs[i].second * 10.0) / 10.0;
        CHECK(rounded == doctest::Approx(expected[i]).epsilon(1e-9));
    }
}

TEST_CASE("mixture_plan_from_json round trips and validates") {
    json j = {{"horizon_tokens", 10e12},
              {"sources", json::array({json{{"name", "web"}, {"fraction", 0.6}, {"unique_tokens", 1e12}},
                                       json{{"name", "code"}, {"fraction", 0.4}, {"unique_tokens", 5e11}}})}};
    mixture_plan plan = mixture_plan_from_json(j, "test");
    REQUIRE(plan.sources.size() == 2);
    CHECK(plan.sources[1].unique_tokens == 5e11);
    auto epochs = mixture_epochs(plan);
    CHECK(epochs[0].second == doctest::Approx(6.0));
    CHECK(epochs[1].second == doctest::Approx(8.0));

    json no_sources = {{"horizon_tokens", 1.0}};
    CHECK_THROWS_AS(mixture_plan_from_json(no_sources, "test"), parse_error);
    json bad_source = j;
    bad_source["sources"][0].erase("fraction");
    CHECK_THROWS_AS(mixture_plan_from_json(bad_source, "test"), parse_error);

    mixture_plan bad = plan;
    bad.horizon_tokens = 0.0;
    CHECK_THROWS_AS(mixture_epochs(bad), validation_error);

    bad = plan;
    bad.sources[0].fraction = 0.5;  // sum 0.9
    CHECK_THROWS_AS(mixture_epochs(bad), validation_error);

    bad = plan;
    bad.sources[0].fraction = 1.5;
    bad.sources[1].fraction = -0.5;
    CHECK_THROWS_AS(mixture_epochs(bad), validation_error);

    bad = plan;
    bad.sources[1].unique_tokens = 0.0;
    CHECK_THROWS_AS(mixture_epochs(bad), validation_error);
}
