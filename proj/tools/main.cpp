// pivotal CLI: thin shell over the C API. Every core operation happens
// behind pivotal.h; this file only parses arguments, moves bytes between
// files and standard streams, and maps status codes to exit codes.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pivotal.h"

namespace {

// exit codes: 0 success, 1 validation, 2 infrastructure
int status_to_exit(pv_status status) {
    if (status == PV_OK) {
        return 0;
    }
    if (status == PV_ERR_VALIDATION || status == PV_ERR_PARSE) {
        return 1;
    }
    return 2;
}

int fail(pv_status status) {
    std::cerr << "error: " << pv_last_error() << "\n";
    return status_to_exit(status);
}

struct config_handle {
    pv_config * cfg = nullptr;

    ~config_handle() { pv_config_free(cfg); }
};

struct string_handle {
    char * s = nullptr;

    ~string_handle() { pv_string_free(s); }
};

struct global_options {
    std::string config_path;
    std::string seed;
    std::string threads;
    std::vector<std::string> sets;  // key=value overrides
};

// builds the run config from --config and the override flags; returns an
// exit code > -1 on failure
int build_config(const global_options & opts, config_handle & handle) {
    pv_status status = opts.config_path.empty() ? pv_config_default(&handle.cfg)
                                                : pv_config_load(opts.config_path.c_str(),
                                                                 &handle.cfg);
    if (status != PV_OK) {
        return fail(status);
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    if (!opts.seed.empty()) {
        overrides.emplace_back("seed", opts.seed);
    }
    if (!opts.threads.empty()) {
        overrides.emplace_back("threads", opts.threads);
    }
    for (const std::string & kv : opts.sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
            return 1;
        }
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto & [key, value] : overrides) {
        status = pv_config_set(handle.cfg, key.c_str(), value.c_str());
        if (status != PV_OK) {
            return fail(status);
        }
    }
    return -1;
}

void print_stats(const char * stats_json) {
    if (stats_json == nullptr) {
        return;
    }
    nlohmann::json stats = nlohmann::json::parse(stats_json, nullptr, false);
    if (stats.is_discarded()) {
        return;
    }
    std::cerr << "rows_in=" << stats.value("rows_in", 0) << " rows_out="
              << stats.value("rows_out", 0) << " dropped=" << stats.value("dropped", 0) << "\n";
}

// reads a whole file, or standard input for "-"
bool slurp(const std::string & path, std::string & out) {
    if (path == "-") {
        std::ostringstream buffer;
        buffer << std::cin.rdbuf();
        out = buffer.str();
        return true;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        return false;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    out = buffer.str();
    return true;
}

std::vector<std::string> non_empty_lines(const std::string & text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (!trimmed.empty()) {
            lines.push_back(trimmed);
        }
    }
    return lines;
}

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"pivotal: data engineering toolkit for LLM post-training"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pv_version());

    global_options opts;
    app.add_option("--config", opts.config_path, "run configuration file");
    app.add_option("--seed", opts.seed, "override the run seed");
    app.add_option("--threads", opts.threads, "override the worker count");
    app.add_option("--set", opts.sets, "override one config key, e.g. --set pts.p_gap=0.25");

    // pending_run holds the chosen action; executed after parsing so global
    // flags are applied no matter where they appear on the command line
    std::function<int()> run;

    // ==== pts ====
    auto * pts = app.add_subcommand("pts", "pivotal token search over queries");
    pts->require_subcommand(1);

    {
        auto * cmd = pts->add_subcommand("mine", "mine single-token preference pairs");
        cmd->fallthrough();
        auto queries = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--queries", *queries, "queries JSONL")->required();
        cmd->add_option("--out", *out, "output pairs JSONL")->required();
        cmd->callback([&, queries, out] {
            run = [&, queries, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_pts_mine(cfg.cfg, queries->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }
    {
        auto * cmd = pts->add_subcommand("prefilter", "keep queries inside the success band");
        cmd->fallthrough();
        auto queries = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--queries", *queries, "queries JSONL")->required();
        cmd->add_option("--out", *out, "output queries JSONL")->required();
        cmd->callback([&, queries, out] {
            run = [&, queries, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_prefilter(cfg.cfg, queries->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== plurality ====
    auto * plurality = app.add_subcommand("plurality", "agreement-based question filtering");
    plurality->require_subcommand(1);
    {
        auto * cmd = plurality->add_subcommand("filter", "sample k answers and vote");
        cmd->fallthrough();
        auto questions = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--questions", *questions, "questions JSONL")->required();
        cmd->add_option("--out", *out, "output bundles JSONL")->required();
        cmd->callback([&, questions, out] {
            run = [&, questions, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_plurality_filter(cfg.cfg, questions->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== decontam ====
    auto * decontam = app.add_subcommand("decontam", "n-gram decontamination");
    decontam->require_subcommand(1);
    {
        auto * cmd = decontam->add_subcommand("build-index", "index benchmark test sets");
        cmd->fallthrough();
        auto benchmarks = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--benchmarks", *benchmarks, "benchmark rows JSONL")->required();
        cmd->add_option("--out", *out, "output index file")->required();
        cmd->callback([&, benchmarks, out] {
            run = [&, benchmarks, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                pv_index * index = nullptr;
                pv_status status = pv_index_build(cfg.cfg, benchmarks->c_str(), &index);
                if (status != PV_OK) {
                    return fail(status);
                }
                status = pv_index_save(index, out->c_str());
                pv_index_free(index);
                if (status != PV_OK) {
                    return fail(status);
                }
                return 0;
            };
        });
    }
    {
        auto * cmd = decontam->add_subcommand("scan", "scan a corpus against the index");
        cmd->fallthrough();
        auto index = std::make_shared<std::string>();
        auto corpus = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto info_threshold = std::make_shared<std::string>();
        auto contaminated_threshold = std::make_shared<std::string>();
        auto allowed_file = std::make_shared<std::string>();
        cmd->add_option("--index", *index, "index file from build-index")->required();
        cmd->add_option("--corpus", *corpus, "training corpus JSONL")->required();
        cmd->add_option("--out", *out, "output reports JSONL")->required();
        cmd->add_option("--info-threshold", *info_threshold, "7-gram ratio above which a doc "
                                                             "is partial_7");
        cmd->add_option("--contaminated-threshold", *contaminated_threshold,
                        "7-gram ratio at which a doc is contaminated_7");
        cmd->add_option("--allowed-file", *allowed_file, "allowed 13-grams, one per line");
        cmd->callback([&, index, corpus, out, info_threshold, contaminated_threshold,
                       allowed_file] {
            run = [&, index, corpus, out, info_threshold, contaminated_threshold, allowed_file] {
                if (!info_threshold->empty()) {
                    opts.sets.push_back("decontam.info_7gram_threshold=" + *info_threshold);
                }
                if (!contaminated_threshold->empty()) {
                    opts.sets.push_back("decontam.contaminated_7gram_threshold=" +
                                        *contaminated_threshold);
                }
                if (!allowed_file->empty()) {
                    opts.sets.push_back("decontam.allowed_file=" + *allowed_file);
                }
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status = pv_run_decontam_scan(cfg.cfg, index->c_str(), corpus->c_str(),
                                                        out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }
    {
        auto * cmd = decontam->add_subcommand("build-allowed",
                                              "collect 13-grams common enough to ignore");
        cmd->fallthrough();
        auto corpus = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto min_frequency = std::make_shared<std::string>();
        cmd->add_option("--corpus", *corpus, "training corpus JSONL")->required();
        cmd->add_option("--out", *out, "output allowed-list text file")->required();
        cmd->add_option("--min-frequency", *min_frequency,
                        "document frequency at which a 13-gram is allowed");
        cmd->callback([&, corpus, out, min_frequency] {
            run = [&, corpus, out, min_frequency] {
                if (!min_frequency->empty()) {
                    opts.sets.push_back("decontam.allowed_min_frequency=" + *min_frequency);
                }
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_build_allowed(cfg.cfg, corpus->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== refusal ====
    auto * refusal = app.add_subcommand("refusal", "refusal SFT/DPO data");
    refusal->require_subcommand(1);
    {
        auto * cmd = refusal->add_subcommand("build", "build refusal rows from seed questions");
        cmd->fallthrough();
        auto seeds = std::make_shared<std::string>();
        auto sft = std::make_shared<std::string>();
        auto dpo = std::make_shared<std::string>();
        auto records = std::make_shared<std::string>();
        cmd->add_option("--seeds", *seeds, "seed questions JSONL")->required();
        cmd->add_option("--sft", *sft, "output SFT rows JSONL")->required();
        cmd->add_option("--dpo", *dpo, "output DPO rows JSONL")->required();
        cmd->add_option("--records", *records, "optional per-question record JSONL");
        cmd->callback([&, seeds, sft, dpo, records] {
            run = [&, seeds, sft, dpo, records] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status = pv_run_refusal_build(
                    cfg.cfg, seeds->c_str(), sft->c_str(), dpo->c_str(),
                    records->empty() ? nullptr : records->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== judge ====
    auto * judge = app.add_subcommand("judge", "judge-labeled preference pairs");
    judge->require_subcommand(1);
    {
        auto * cmd = judge->add_subcommand("label", "sample replies and label every pair");
        cmd->fallthrough();
        auto prompts = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--prompts", *prompts, "chat prompts JSONL")->required();
        cmd->add_option("--out", *out, "output pairs JSONL")->required();
        cmd->callback([&, prompts, out] {
            run = [&, prompts, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_judge_label(cfg.cfg, prompts->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== fim ====
    auto * fim = app.add_subcommand("fim", "fill-in-the-middle exercises");
    fim->require_subcommand(1);
    {
        auto * cmd = fim->add_subcommand("carve", "carve one exercise per document");
        cmd->fallthrough();
        auto docs = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--docs", *docs, "documents JSONL")->required();
        cmd->add_option("--out", *out, "output exercises JSONL")->required();
        cmd->callback([&, docs, out] {
            run = [&, docs, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_fim_carve(cfg.cfg, docs->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }
    {
        auto * cmd = fim->add_subcommand("sample", "rejection-sample graded solutions");
        cmd->fallthrough();
        auto exercises = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--exercises", *exercises, "exercises JSONL")->required();
        cmd->add_option("--out", *out, "output solutions JSONL")->required();
        cmd->callback([&, exercises, out] {
            run = [&, exercises, out] {
                config_handle cfg;
                int rc = build_config(opts, cfg);
                if (rc >= 0) {
                    return rc;
                }
                string_handle stats;
                pv_status status =
                    pv_run_fim_sample(cfg.cfg, exercises->c_str(), out->c_str(), &stats.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                print_stats(stats.s);
                return 0;
            };
        });
    }

    // ==== eval ====
    auto * eval = app.add_subcommand("eval", "evaluation metrics");
    eval->require_subcommand(1);
    {
        auto * cmd = eval->add_subcommand("f1", "F1 over correct/incorrect/refused counts");
        cmd->fallthrough();
        auto correct = std::make_shared<uint64_t>(0);
        auto incorrect = std::make_shared<uint64_t>(0);
        auto refused = std::make_shared<uint64_t>(0);
        cmd->add_option("--correct", *correct, "correct answers")->required();
        cmd->add_option("--incorrect", *incorrect, "incorrect answers")->required();
        cmd->add_option("--refused", *refused, "refusals")->required();
        cmd->callback([&, correct, incorrect, refused] {
            run = [&, correct, incorrect, refused] {
                double f1 = 0.0;
                pv_status status = pv_eval_f1(*correct, *incorrect, *refused, &f1);
                if (status != PV_OK) {
                    return fail(status);
                }
                std::printf("%.4f\n", f1);
                return 0;
            };
        });
    }
    {
        auto * cmd = eval->add_subcommand("amc", "score multiple-choice contests");
        cmd->fallthrough();
        auto choices = std::make_shared<std::string>();
        auto key = std::make_shared<std::string>();
        cmd->add_option("--choices", *choices,
                        "one line per contest: 25 chars of A..E, '-' for blank")
            ->required();
        cmd->add_option("--key", *key, "one line per contest: 25 letters A..E")->required();
        cmd->callback([&, choices, key] {
            run = [&, choices, key] {
                std::string choices_text;
                std::string key_text;
                if (!slurp(*choices, choices_text) || !slurp(*key, key_text)) {
                    return 1;
                }
                std::vector<std::string> choice_lines = non_empty_lines(choices_text);
                std::vector<std::string> key_lines = non_empty_lines(key_text);
                if (choice_lines.size() != key_lines.size()) {
                    std::cerr << "error: " << choice_lines.size() << " choice lines vs "
                              << key_lines.size() << " key lines\n";
                    return 1;
                }
                if (choice_lines.empty()) {
                    std::cerr << "error: no contests to score\n";
                    return 1;
                }
                double total = 0.0;
                for (size_t i = 0; i < choice_lines.size(); i++) {
                    double score = 0.0;
                    pv_status status =
                        pv_amc_score(choice_lines[i].c_str(), key_lines[i].c_str(), &score);
                    if (status != PV_OK) {
                        return fail(status);
                    }
                    std::printf("contest %zu: %.1f\n", i + 1, score);
                    total += score;
                }
                std::printf("mean: %.2f\n", total / choice_lines.size());
                return 0;
            };
        });
    }
    {
        auto * cmd = eval->add_subcommand("mixture", "epochs per source for a mixture plan");
        cmd->fallthrough();
        auto plan = std::make_shared<std::string>();
        cmd->add_option("--plan", *plan,
                        "plan JSON: {horizon_tokens, sources:[{name, fraction, unique_tokens}]}")
            ->required();
        cmd->callback([&, plan] {
            run = [&, plan] {
                std::string plan_text;
                if (!slurp(*plan, plan_text)) {
                    return 1;
                }
                string_handle result;
                pv_status status = pv_mixture_epochs(plan_text.c_str(), &result.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                nlohmann::json epochs = nlohmann::json::parse(result.s);
                for (const auto & [name, value] : epochs.items()) {
                    std::printf("%s\t%.1f\n", name.c_str(), value.get<double>());
                }
                return 0;
            };
        });
    }

    // ==== render ====
    auto * render = app.add_subcommand("render", "serialization helpers");
    render->require_subcommand(1);
    {
        auto * cmd = render->add_subcommand("chatml", "render a transcript to prompt text");
        cmd->fallthrough();
        auto messages = std::make_shared<std::string>("-");
        auto stub = std::make_shared<bool>(false);
        cmd->add_option("--messages", *messages,
                        "JSON array of {role, content}; '-' reads standard input");
        cmd->add_flag("--stub", *stub, "append an open assistant header");
        cmd->callback([&, messages, stub] {
            run = [&, messages, stub] {
                std::string messages_text;
                if (!slurp(*messages, messages_text)) {
                    return 1;
                }
                string_handle text;
                pv_status status = pv_render_chatml(messages_text.c_str(), *stub ? 1 : 0,
                                                    &text.s);
                if (status != PV_OK) {
                    return fail(status);
                }
                std::fwrite(text.s, 1, std::strlen(text.s), stdout);
                return 0;
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return 1;
    }

    if (!run) {
        std::cerr << "error: no subcommand selected\n";
        return 1;
    }
    return run();
}
