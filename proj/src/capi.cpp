#include "pivotal.h"

#include <array>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chatml.hpp"
#include "common.hpp"
#include "config.hpp"
#include "decontam.hpp"
#include "evalmetrics.hpp"
#include "fim.hpp"
#include "jsonl.hpp"
#include "oracle.hpp"
#include "pipeline.hpp"

struct pv_config {
    pv::run_config cfg;
};

struct pv_index {
    pv::ngram_index index;
};

namespace {

thread_local std::string g_last_error;

char * dup_string(const std::string & s) {
    char * out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require_arg(const void * p, const char * name) {
    if (p == nullptr) {
        throw pv::validation_error(std::string(name) + " must not be NULL");
    }
}

pv::json parse_json_arg(const char * text, const char * what) {
    require_arg(text, what);
    try {
        return pv::json::parse(text);
    } catch (const std::exception & e) {
        throw pv::parse_error(std::string(what) + ": " + e.what());
    }
}

pv::json stats_to_json(const pv::run_stats & stats) {
    pv::json j;
    j["rows_in"] = stats.rows_in;
    j["rows_out"] = stats.rows_out;
    j["dropped"] = stats.dropped;
    return j;
}

void emit_stats(char ** out_stats, const pv::run_stats & stats) {
    if (out_stats != nullptr) {
        *out_stats = dup_string(stats_to_json(stats).dump());
    }
}

// every exported function body runs under this; exceptions become status
// codes and pv_last_error() text
template <typename F>
pv_status guarded(F && f) {
    try {
        f();
        return PV_OK;
    } catch (const pv::validation_error & e) {
        g_last_error = e.what();
        return PV_ERR_VALIDATION;
    } catch (const pv::parse_error & e) {
        g_last_error = e.what();
        return PV_ERR_PARSE;
    } catch (const pv::transport_error & e) {
        g_last_error = e.what();
        return PV_ERR_TRANSPORT;
    } catch (const pv::adjudication_error & e) {
        g_last_error = e.what();
        return PV_ERR_INFRA;
    } catch (const pv::infra_error & e) {
        g_last_error = e.what();
        return PV_ERR_INFRA;
    } catch (const std::exception & e) {
        g_last_error = e.what();
        return PV_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return PV_ERR_UNKNOWN;
    }
}

}  // namespace

extern "C" {

const char * pv_last_error(void) {
    return g_last_error.c_str();
}

void pv_string_free(char * s) {
    std::free(s);
}

const char * pv_version(void) {
    return "0.1.0";
}

// ==== configuration ====

pv_status pv_config_default(pv_config ** out) {
    return guarded([&] {
        require_arg(out, "out");
        *out = new pv_config{};
    });
}

pv_status pv_config_load(const char * path, pv_config ** out) {
    return guarded([&] {
        require_arg(path, "path");
        require_arg(out, "out");
        *out = new pv_config{pv::load_config(path)};
    });
}

pv_status pv_config_set(pv_config * cfg, const char * key, const char * value) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(key, "key");
        require_arg(value, "value");
        cfg->cfg.set(key, value);
    });
}

pv_status pv_config_get(const pv_config * cfg, const char * key, char ** out_value) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(key, "key");
        require_arg(out_value, "out_value");
        *out_value = dup_string(cfg->cfg.get(key));
    });
}

void pv_config_free(pv_config * cfg) {
    delete cfg;
}

// ==== pure operations ====

pv_status pv_eval_f1(uint64_t n_correct, uint64_t n_incorrect, uint64_t n_refused,
                     double * out_f1) {
    return guarded([&] {
        require_arg(out_f1, "out_f1");
        *out_f1 = pv::f1_score(n_correct, n_incorrect, n_refused);
    });
}

pv_status pv_amc_score(const char * choices, const char * key, double * out_score) {
    return guarded([&] {
        require_arg(choices, "choices");
        require_arg(key, "key");
        require_arg(out_score, "out_score");
        std::vector<std::string> choice_list;
        for (const char * p = choices; *p != '\0'; p++) {
            choice_list.push_back(*p == '-' ? std::string("blank") : std::string(1, *p));
        }
        std::vector<std::string> key_list;
        for (const char * p = key; *p != '\0'; p++) {
            key_list.push_back(std::string(1, *p));
        }
        *out_score = pv::amc_score(choice_list, key_list);
    });
}

pv_status pv_amc_prompt(const char * question, const char * options_json, char ** out) {
    return guarded([&] {
        require_arg(question, "question");
        require_arg(out, "out");
        pv::json parsed = parse_json_arg(options_json, "options_json");
        if (!parsed.is_array() || parsed.size() != 5) {
            throw pv::validation_error("options_json must be a JSON array of 5 option texts");
        }
        std::array<std::string, 5> options;
        for (size_t i = 0; i < 5; i++) {
            if (!parsed[i].is_string()) {
                throw pv::validation_error("options_json entries must be strings");
            }
            options[i] = parsed[i].get<std::string>();
        }
        *out = dup_string(pv::render_amc_prompt(question, options));
    });
}

pv_status pv_extract_choice(const char * solution, char * out_choice) {
    return guarded([&] {
        require_arg(solution, "solution");
        require_arg(out_choice, "out_choice");
        pv::choice_extraction res = pv::extract_choice(solution);
        *out_choice = res.choice == "blank" ? '-' : res.choice[0];
    });
}

pv_status pv_mixture_epochs(const char * plan_json, char ** out_json) {
    return guarded([&] {
        require_arg(out_json, "out_json");
        pv::mixture_plan plan =
            pv::mixture_plan_from_json(parse_json_arg(plan_json, "plan_json"), "plan_json");
        pv::json result;
        for (const auto & [name, epochs] : pv::mixture_epochs(plan)) {
            result[name] = epochs;
        }
        *out_json = dup_string(result.dump());
    });
}

pv_status pv_render_chatml(const char * messages_json, int open_assistant_stub,
                           char ** out_text) {
    return guarded([&] {
        require_arg(out_text, "out_text");
        pv::chat_transcript messages = pv::transcript_from_json(
            parse_json_arg(messages_json, "messages_json"), "messages_json");
        *out_text = dup_string(pv::render_chatml(messages, open_assistant_stub != 0));
    });
}

pv_status pv_parse_chatml(const char * text, char ** out_messages_json) {
    return guarded([&] {
        require_arg(text, "text");
        require_arg(out_messages_json, "out_messages_json");
        *out_messages_json = dup_string(pv::transcript_to_json(pv::parse_chatml(text)).dump());
    });
}

pv_status pv_normalize_tokens(const char * text, char ** out_json) {
    return guarded([&] {
        require_arg(text, "text");
        require_arg(out_json, "out_json");
        pv::json tokens = pv::normalize_tokens(text);
        *out_json = dup_string(tokens.dump());
    });
}

pv_status pv_plurality_filter(const char * question, const char * answers_json,
                              char ** out_bundle_json) {
    return guarded([&] {
        require_arg(question, "question");
        require_arg(out_bundle_json, "out_bundle_json");
        pv::json parsed = parse_json_arg(answers_json, "answers_json");
        if (!parsed.is_array()) {
            throw pv::validation_error("answers_json must be a JSON array of strings");
        }
        std::vector<std::string> answers;
        for (const pv::json & a : parsed) {
            if (!a.is_string()) {
                throw pv::validation_error("answers_json entries must be strings");
            }
            answers.push_back(a.get<std::string>());
        }
        pv::question_bundle bundle =
            pv::filter_question(question, answers, pv::normalized_equivalence());
        pv::json out;
        out["question"] = bundle.question;
        out["answers"] = bundle.answers;
        out["plurality_answer"] = bundle.plurality_answer;
        out["plurality_count"] = bundle.plurality_count;
        out["decision"] = pv::filter_decision_name(bundle.decision);
        *out_bundle_json = dup_string(out.dump());
    });
}

pv_status pv_fim_carve(const char * doc_text, const char * policy, uint64_t seed,
                       char ** out_json) {
    return guarded([&] {
        require_arg(doc_text, "doc_text");
        require_arg(policy, "policy");
        require_arg(out_json, "out_json");
        pv::fim_settings cfg;
        cfg.policy = policy;
        if (cfg.policy != "code" && cfg.policy != "prose") {
            throw pv::validation_error("policy must be 'code' or 'prose'");
        }
        std::optional<pv::fim_exercise> exercise = pv::carve_exercise(doc_text, "", cfg, seed);
        if (!exercise) {
            *out_json = nullptr;
            return;
        }
        pv::json out;
        out["source_id"] = exercise->source_id;
        out["policy"] = exercise->policy;
        out["context_before"] = exercise->context_before;
        out["ground_truth"] = exercise->ground_truth;
        out["context_after"] = exercise->context_after;
        *out_json = dup_string(out.dump());
    });
}

// ==== decontamination index ====

pv_status pv_index_build(const pv_config * cfg, const char * benchmarks_jsonl, pv_index ** out) {
    return guarded([&] {
        require_arg(benchmarks_jsonl, "benchmarks_jsonl");
        require_arg(out, "out");
        std::set<std::string> admitted;
        if (cfg != nullptr) {
            std::vector<std::string> names = pv::split_csv(cfg->cfg.decontam.benchmarks);
            admitted.insert(names.begin(), names.end());
        }
        std::vector<pv::benchmark_test> tests;
        for (const pv::json & row : pv::read_rows(benchmarks_jsonl, "benchmark")) {
            std::string benchmark = row["benchmark"].get<std::string>();
            if (!admitted.empty() && admitted.count(benchmark) == 0) {
                continue;
            }
            tests.push_back(
                {benchmark, row["id"].get<std::string>(), row["text"].get<std::string>()});
        }
        *out = new pv_index{pv::build_index(std::move(tests))};
    });
}

pv_status pv_index_save(const pv_index * idx, const char * path) {
    return guarded([&] {
        require_arg(idx, "idx");
        require_arg(path, "path");
        pv::save_index(idx->index, path);
    });
}

pv_status pv_index_load(const char * path, pv_index ** out) {
    return guarded([&] {
        require_arg(path, "path");
        require_arg(out, "out");
        *out = new pv_index{pv::load_index(path)};
    });
}

void pv_index_free(pv_index * idx) {
    delete idx;
}

pv_status pv_index_check(const pv_index * idx, const pv_config * cfg, const char * doc_text,
                         char ** out_report_json) {
    return guarded([&] {
        require_arg(idx, "idx");
        require_arg(cfg, "cfg");
        require_arg(doc_text, "doc_text");
        require_arg(out_report_json, "out_report_json");
        std::set<std::string> allowed = pv::load_allowed_file(cfg->cfg.decontam.allowed_file);
        pv::ngram_report report =
            pv::check_contamination(doc_text, idx->index, allowed, cfg->cfg.decontam);
        *out_report_json = dup_string(pv::report_to_json(report, "", "").dump());
    });
}

// ==== pipeline entry points ====

pv_status pv_run_prefilter(const pv_config * cfg, const char * queries_jsonl,
                           const char * out_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(queries_jsonl, "queries_jsonl");
        require_arg(out_jsonl, "out_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_prefilter(ctx, queries_jsonl, out_jsonl));
    });
}

pv_status pv_run_pts_mine(const pv_config * cfg, const char * queries_jsonl,
                          const char * out_pairs_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(queries_jsonl, "queries_jsonl");
        require_arg(out_pairs_jsonl, "out_pairs_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_pts_mine(ctx, queries_jsonl, out_pairs_jsonl));
    });
}

pv_status pv_run_plurality_filter(const pv_config * cfg, const char * questions_jsonl,
                                  const char * out_bundles_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(questions_jsonl, "questions_jsonl");
        require_arg(out_bundles_jsonl, "out_bundles_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_plurality_filter(ctx, questions_jsonl, out_bundles_jsonl));
    });
}

pv_status pv_run_decontam_scan(const pv_config * cfg, const char * index_path,
                               const char * corpus_jsonl, const char * out_reports_jsonl,
                               char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(index_path, "index_path");
        require_arg(corpus_jsonl, "corpus_jsonl");
        require_arg(out_reports_jsonl, "out_reports_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats,
                   pv::run_decontam_scan(ctx, index_path, corpus_jsonl, out_reports_jsonl));
    });
}

pv_status pv_run_build_allowed(const pv_config * cfg, const char * corpus_jsonl,
                               const char * out_allowed_txt, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(corpus_jsonl, "corpus_jsonl");
        require_arg(out_allowed_txt, "out_allowed_txt");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_build_allowed(ctx, corpus_jsonl, out_allowed_txt));
    });
}

pv_status pv_run_refusal_build(const pv_config * cfg, const char * seeds_jsonl,
                               const char * out_sft_jsonl, const char * out_dpo_jsonl,
                               const char * out_records_jsonl_or_null, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(seeds_jsonl, "seeds_jsonl");
        require_arg(out_sft_jsonl, "out_sft_jsonl");
        require_arg(out_dpo_jsonl, "out_dpo_jsonl");
        std::string records =
            out_records_jsonl_or_null != nullptr ? out_records_jsonl_or_null : "";
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats,
                   pv::run_refusal_build(ctx, seeds_jsonl, out_sft_jsonl, out_dpo_jsonl, records));
    });
}

pv_status pv_run_judge_label(const pv_config * cfg, const char * prompts_jsonl,
                             const char * out_pairs_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(prompts_jsonl, "prompts_jsonl");
        require_arg(out_pairs_jsonl, "out_pairs_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_judge_label(ctx, prompts_jsonl, out_pairs_jsonl));
    });
}

pv_status pv_run_fim_carve(const pv_config * cfg, const char * docs_jsonl,
                           const char * out_exercises_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(docs_jsonl, "docs_jsonl");
        require_arg(out_exercises_jsonl, "out_exercises_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_fim_carve(ctx, docs_jsonl, out_exercises_jsonl));
    });
}

pv_status pv_run_fim_sample(const pv_config * cfg, const char * exercises_jsonl,
                            const char * out_solutions_jsonl, char ** out_stats) {
    return guarded([&] {
        require_arg(cfg, "cfg");
        require_arg(exercises_jsonl, "exercises_jsonl");
        require_arg(out_solutions_jsonl, "out_solutions_jsonl");
        pv::pipeline_context ctx(cfg->cfg);
        emit_stats(out_stats, pv::run_fim_sample(ctx, exercises_jsonl, out_solutions_jsonl));
    });
}

}  // extern "C"
