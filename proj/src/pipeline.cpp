#include "pipeline.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "chatml.hpp"
#include "common.hpp"
#include "decontam.hpp"
#include "fim.hpp"
#include "judge.hpp"
#include "pts.hpp"
#include "refusal.hpp"

namespace pv {

// ==== row schemas ====

namespace {

void require_string(const json & row, const char * key, const std::string & where) {
    if (!row.contains(key) || !row[key].is_string()) {
        throw parse_error(where + ": field '" + key + "' must be a string");
    }
}

void require_number(const json & row, const char * key, const std::string & where) {
    if (!row.contains(key) || !row[key].is_number()) {
        throw parse_error(where + ": field '" + key + "' must be a number");
    }
}

void require_bool(const json & row, const char * key, const std::string & where) {
    if (!row.contains(key) || !row[key].is_boolean()) {
        throw parse_error(where + ": field '" + key + "' must be a boolean");
    }
}

}  // namespace

json validate_row(const json & row, const std::string & schema, const std::string & where) {
    if (!row.is_object()) {
        throw parse_error(where + ": row must be a JSON object");
    }
    if (schema == "query") {
        require_string(row, "id", where);
        transcript_from_json(row.contains("messages") ? row["messages"] : json(), where);
        if (!row.contains("oracle") || !row["oracle"].is_object()) {
            throw parse_error(where + ": field 'oracle' must be an object");
        }
        binding_from_json(row["oracle"], where);
    } else if (schema == "preference_pair") {
        require_string(row, "query_id", where);
        require_string(row, "context_chatml", where);
        require_string(row, "accepted", where);
        require_string(row, "rejected", where);
        require_string(row, "kind", where);
    } else if (schema == "sft_row") {
        transcript_from_json(row.contains("messages") ? row["messages"] : json(), where);
    } else if (schema == "chat") {
        require_string(row, "id", where);
        transcript_from_json(row.contains("messages") ? row["messages"] : json(), where);
    } else if (schema == "ngram_report") {
        require_string(row, "id", where);
        require_string(row, "status", where);
        require_bool(row, "contaminated", where);
        require_number(row, "7gram_ratio", where);
    } else if (schema == "exercise") {
        require_string(row, "source_id", where);
        require_string(row, "policy", where);
        require_string(row, "context_before", where);
        require_string(row, "ground_truth", where);
        require_string(row, "context_after", where);
    } else if (schema == "seed") {
        require_string(row, "question", where);
        require_string(row, "answer", where);
    } else if (schema == "doc") {
        require_string(row, "id", where);
        require_string(row, "text", where);
    } else if (schema == "benchmark") {
        require_string(row, "benchmark", where);
        require_string(row, "id", where);
        require_string(row, "text", where);
    } else if (schema == "question") {
        require_string(row, "id", where);
        require_string(row, "question", where);
    } else if (schema == "solution") {
        require_string(row, "source_id", where);
        require_string(row, "solution", where);
        require_number(row, "grade", where);
    } else {
        throw validation_error("unknown row schema '" + schema + "'");
    }
    return row;
}

std::vector<json> read_rows(const std::string & path, const std::string & schema) {
    std::vector<json> rows = read_jsonl(path);
    for (size_t i = 0; i < rows.size(); i++) {
        validate_row(rows[i], schema, path + " row " + std::to_string(i + 1));
    }
    return rows;
}

void write_rows(const std::string & path, const std::vector<json> & rows,
                const std::string & schema) {
    for (size_t i = 0; i < rows.size(); i++) {
        validate_row(rows[i], schema, path + " row " + std::to_string(i + 1));
    }
    write_jsonl(path, rows);
}

loaded_query load_query(const json & row, const std::string & where) {
    validate_row(row, "query", where);
    loaded_query q;
    q.id = row["id"].get<std::string>();
    q.messages = transcript_from_json(row["messages"], where);
    q.binding = binding_from_json(row["oracle"], where);
    for (const chat_message & m : q.messages) {
        if (m.role == "user") {
            q.question = m.content;
        }
    }
    return q;
}

// ==== provider wiring ====

pipeline_context::pipeline_context(run_config cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

provider * pipeline_context::get(const std::string & role) {
    auto it = cache_.find(role);
    if (it == cache_.end()) {
        it = cache_.emplace(role, make_provider(cfg_.provider_for(role), cfg_.seed)).first;
    }
    return it->second.get();
}

provider * pipeline_context::get_judge() {
    if (cfg_.providers.count("judge") == 0) {
        return nullptr;
    }
    return get("judge");
}

// ==== pts pipelines ====

static pts_query to_pts_query(const loaded_query & lq) {
    return {lq.id, render_chatml(lq.messages, true), lq.binding};
}

run_stats run_prefilter(pipeline_context & ctx, const std::string & queries_path,
                        const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(queries_path, "query");
    provider * model = ctx.get("model");
    provider * judge = ctx.get_judge();

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> kept;
    for (const json & row : rows) {
        loaded_query lq = load_query(row, queries_path);
        pts_engine engine(to_pts_query(lq), model,
                          make_scorer(lq.binding, lq.question, judge, cfg.oracle), cfg.pts,
                          cfg.effective_threads());
        double p = engine.estimate(token_seq{}).p;
        if (prefilter_keep(p, cfg.pts)) {
            json out = row;
            out["p_success"] = p;
            kept.push_back(std::move(out));
        } else {
            stats.dropped++;
        }
    }
    stats.rows_out = kept.size();
    write_rows(out_path, kept, "query");
    return stats;
}

run_stats run_pts_mine(pipeline_context & ctx, const std::string & queries_path,
                       const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(queries_path, "query");
    provider * model = ctx.get("model");
    provider * judge = ctx.get_judge();

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> out;
    std::unordered_set<std::string> seen;
    for (const json & row : rows) {
        loaded_query lq = load_query(row, queries_path);
        pts_engine engine(to_pts_query(lq), model,
                          make_scorer(lq.binding, lq.question, judge, cfg.oracle), cfg.pts,
                          cfg.effective_threads());
        for (const token_seq & completion :
             engine.sample_completions(cfg.pts.completions_per_query)) {
            if (completion.empty()) {
                continue;
            }
            for (const pivotal_token_hit & hit : engine.find_pivotal_tokens(completion)) {
                for (const preference_pair & pair : engine.build_preference_pairs(hit)) {
                    json r;
                    r["query_id"] = pair.query_id;
                    r["context_chatml"] = pair.context;
                    r["accepted"] = pair.accepted;
                    r["rejected"] = pair.rejected;
                    r["kind"] = pair.kind;
                    r["p_before"] = pair.p_before;
                    r["p_acc"] = pair.p_acc;
                    r["p_rej"] = pair.p_rej;
                    if (seen.insert(r.dump()).second) {
                        out.push_back(std::move(r));
                    }
                }
            }
        }
    }
    stats.rows_out = out.size();
    write_rows(out_path, out, "preference_pair");
    return stats;
}

// ==== oracle pipelines ====

run_stats run_plurality_filter(pipeline_context & ctx, const std::string & questions_path,
                               const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(questions_path, "question");
    provider * model = ctx.get("model");
    provider * judge = ctx.get_judge();
    if (cfg.oracle.equivalence == "judge" && judge == nullptr) {
        throw validation_error("plurality filter: oracle.equivalence=judge needs a "
                               "[provider.judge] section");
    }

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> out;
    for (const json & row : rows) {
        std::string question = row["question"].get<std::string>();
        completion_request req;
        req.context = render_chatml({{"user", question}}, true);
        req.n = cfg.oracle.plurality_k;
        req.temperature = 1.0;
        req.max_tokens = cfg.pts.max_tokens;

        std::vector<std::string> answers;
        for (const token_seq & seq : model->sample_completions(req)) {
            answers.push_back(seq.text());
        }
        equivalence_fn equivalent =
            cfg.oracle.equivalence == "judge"
                ? judge_equivalence(question, judge, cfg.oracle.judge_retries)
                : normalized_equivalence();
        question_bundle bundle = filter_question(question, answers, equivalent);

        json r = row;
        r["answers"] = bundle.answers;
        r["plurality_answer"] = bundle.plurality_answer;
        r["plurality_count"] = bundle.plurality_count;
        r["decision"] = filter_decision_name(bundle.decision);
        if (bundle.decision != filter_decision::keep) {
            stats.dropped++;
        }
        out.push_back(std::move(r));
    }
    stats.rows_out = out.size();
    write_rows(out_path, out, "question");
    return stats;
}

// ==== decontam pipelines ====

run_stats run_build_index(pipeline_context & ctx, const std::string & benchmarks_path,
                          const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(benchmarks_path, "benchmark");
    std::vector<std::string> names = split_csv(cfg.decontam.benchmarks);
    std::set<std::string> admitted(names.begin(), names.end());

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<benchmark_test> tests;
    for (const json & row : rows) {
        std::string benchmark = row["benchmark"].get<std::string>();
        if (!admitted.empty() && admitted.count(benchmark) == 0) {
            stats.dropped++;
            continue;
        }
        tests.push_back({benchmark, row["id"].get<std::string>(), row["text"].get<std::string>()});
    }
    stats.rows_out = tests.size();
    save_index(build_index(std::move(tests)), out_path);
    return stats;
}

run_stats run_decontam_scan(pipeline_context & ctx, const std::string & index_path,
                            const std::string & corpus_path, const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    ngram_index index = load_index(index_path);
    std::set<std::string> allowed = load_allowed_file(cfg.decontam.allowed_file);
    std::vector<json> rows = read_rows(corpus_path, "doc");

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> reports(rows.size());
    parallel_for(rows.size(), cfg.effective_threads(), [&](size_t i) {
        ngram_report report = check_contamination(rows[i]["text"].get<std::string>(), index,
                                                  allowed, cfg.decontam);
        reports[i] = report_to_json(report, rows[i]["id"].get<std::string>(),
                                    get_string_or(rows[i], "dataset", ""));
    });
    for (const json & report : reports) {
        if (report["contaminated"].get<bool>()) {
            stats.dropped++;
        }
    }
    stats.rows_out = reports.size();
    write_rows(out_path, reports, "ngram_report");
    return stats;
}

run_stats run_build_allowed(pipeline_context & ctx, const std::string & corpus_path,
                            const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(corpus_path, "doc");
    std::vector<std::string> documents;
    for (const json & row : rows) {
        documents.push_back(row["text"].get<std::string>());
    }
    std::set<std::string> allowed =
        build_allowed_13grams(documents, (uint64_t) cfg.decontam.allowed_min_frequency);

    std::string body;
    for (const std::string & gram : allowed) {
        body += gram;
        body += '\n';
    }
    atomic_write_file(out_path, body);

    run_stats stats;
    stats.rows_in = rows.size();
    stats.rows_out = allowed.size();
    return stats;
}

// ==== refusal pipeline ====

run_stats run_refusal_build(pipeline_context & ctx, const std::string & seeds_path,
                            const std::string & out_sft_path, const std::string & out_dpo_path,
                            const std::string & records_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(seeds_path, "seed");
    refusal_builder builder(ctx.get("model"), ctx.get("generator"), ctx.get_judge(), cfg.refusal,
                            cfg.oracle);

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> sft_out;
    std::vector<json> dpo_out;
    std::vector<json> record_out;
    for (const json & row : rows) {
        std::vector<std::string> alternates;
        if (row.contains("alternates") && row["alternates"].is_array()) {
            for (const json & alt : row["alternates"]) {
                alternates.push_back(alt.get<std::string>());
            }
        }
        refusal_record record = builder.build_record(row["question"].get<std::string>(),
                                                     row["answer"].get<std::string>(), alternates);
        auto [sft_rows, dpo_rows] = assemble_rows(record, cfg.refusal);
        for (const sft_row & r : sft_rows) {
            sft_out.push_back(json{{"messages", transcript_to_json(r.messages)}});
        }
        for (const dpo_row & r : dpo_rows) {
            json d;
            d["query_id"] = record.question;
            d["context_chatml"] = render_chatml({{"user", r.context}}, true);
            d["accepted"] = r.accepted;
            d["rejected"] = r.rejected;
            d["kind"] = "refusal_truncated";
            d["truncated_to"] = r.truncated_to;
            dpo_out.push_back(std::move(d));
        }
        if (!records_path.empty()) {
            json r;
            r["question"] = record.question;
            r["answer_key"] = record.answer_key;
            r["alternates"] = record.alternates;
            r["accuracy"] = record.accuracy;
            r["correct_answer"] = record.correct_answer;
            r["refusal"] = record.refusal;
            if (record.bogus_question) {
                r["bogus_question"] = *record.bogus_question;
                r["bogus_quality"] = *record.bogus_quality;
                r["bogus_refusal"] = *record.bogus_refusal;
            }
            if (record.wrong_sample) {
                r["wrong_sample"] = *record.wrong_sample;
            }
            record_out.push_back(std::move(r));
        }
    }
    stats.rows_out = sft_out.size() + dpo_out.size();
    write_rows(out_sft_path, sft_out, "sft_row");
    write_rows(out_dpo_path, dpo_out, "preference_pair");
    if (!records_path.empty()) {
        write_jsonl(records_path, record_out);
    }
    return stats;
}

// ==== judge pipeline ====

static json score_to_json(const assistant_score & score) {
    json j;
    j["faults"] = score.faults;
    j["accuracy"] = score.accuracy;
    j["style"] = score.style;
    j["detail"] = score.detail;
    return j;
}

run_stats run_judge_label(pipeline_context & ctx, const std::string & prompts_path,
                          const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(prompts_path, "chat");
    std::vector<std::string> sources = split_csv(cfg.judge.sources);
    if (sources.size() < 2) {
        throw validation_error("judge label: judge.sources must name at least two provider "
                               "sections");
    }
    provider * judge = ctx.get("judge");

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> out;
    for (const json & row : rows) {
        chat_transcript messages = transcript_from_json(row["messages"], prompts_path);
        std::string context = render_chatml(messages, true);

        completion_request req;
        req.context = context;
        req.n = 1;
        req.temperature = 1.0;
        req.max_tokens = cfg.judge.max_tokens;
        std::vector<std::string> replies;
        for (const std::string & source : sources) {
            replies.push_back(ctx.get(source)->sample_completions(req)[0].text());
        }

        judge_score scores;
        try {
            scores = judge_responses(messages, replies, judge, cfg.judge);
        } catch (const adjudication_error &) {
            stats.dropped++;
            continue;
        }
        for (const judge_pair & pair : label_pairs(scores, replies, cfg.judge.mode)) {
            json r;
            r["query_id"] = row["id"];
            r["context_chatml"] = context;
            r["accepted"] = pair.accepted;
            r["rejected"] = pair.rejected;
            r["kind"] = "judge_full_length";
            r["mode"] = pair.mode;
            r["label_accuracy"] = pair.label_accuracy;
            r["label_overall"] = pair.label_overall;
            r["first_source"] = sources[pair.first_index];
            r["second_source"] = sources[pair.second_index];
            r["first_score"] = score_to_json(pair.first_score);
            r["second_score"] = score_to_json(pair.second_score);
            out.push_back(std::move(r));
        }
    }
    stats.rows_out = out.size();
    write_rows(out_path, out, "preference_pair");
    return stats;
}

// ==== fim pipelines ====

run_stats run_fim_carve(pipeline_context & ctx, const std::string & docs_path,
                        const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(docs_path, "doc");

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> out;
    for (const json & row : rows) {
        std::optional<fim_exercise> exercise = carve_exercise(
            row["text"].get<std::string>(), row["id"].get<std::string>(), cfg.fim, cfg.seed);
        if (!exercise) {
            stats.dropped++;
            continue;
        }
        json r;
        r["source_id"] = exercise->source_id;
        r["policy"] = exercise->policy;
        r["context_before"] = exercise->context_before;
        r["ground_truth"] = exercise->ground_truth;
        r["context_after"] = exercise->context_after;
        out.push_back(std::move(r));
    }
    stats.rows_out = out.size();
    write_rows(out_path, out, "exercise");
    return stats;
}

run_stats run_fim_sample(pipeline_context & ctx, const std::string & exercises_path,
                         const std::string & out_path) {
    const run_config & cfg = ctx.cfg();
    std::vector<json> rows = read_rows(exercises_path, "exercise");
    provider * model = ctx.get("model");
    provider * judge = ctx.get_judge();
    if (cfg.fim.grade_mode == "judge" && judge == nullptr) {
        throw validation_error("fim sample: fim.grade_mode=judge needs a [provider.judge] "
                               "section");
    }

    run_stats stats;
    stats.rows_in = rows.size();
    std::vector<json> out;
    for (const json & row : rows) {
        fim_exercise exercise;
        exercise.source_id = row["source_id"].get<std::string>();
        exercise.policy = row["policy"].get<std::string>();
        exercise.context_before = row["context_before"].get<std::string>();
        exercise.ground_truth = row["ground_truth"].get<std::string>();
        exercise.context_after = row["context_after"].get<std::string>();

        std::vector<fim_solution> solutions =
            rejection_sample_solutions(exercise, model, cfg.fim.n_samples, cfg.fim.grade_mode,
                                       judge, cfg.fim, cfg.oracle.judge_retries);
        stats.dropped += (size_t) cfg.fim.n_samples - solutions.size();
        for (const fim_solution & solution : solutions) {
            json r;
            r["source_id"] = exercise.source_id;
            r["solution"] = solution.full_text;
            r["guess"] = solution.guess;
            r["grade"] = solution.grade;
            out.push_back(std::move(r));
        }
    }
    stats.rows_out = out.size();
    write_rows(out_path, out, "solution");
    return stats;
}

}  // namespace pv
