#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "jsonl.hpp"
#include "oracle.hpp"
#include "provider.hpp"

namespace pv {

// row schema checks: required fields with the right types, extra fields kept
json validate_row(const json & row, const std::string & schema, const std::string & where);
std::vector<json> read_rows(const std::string & path, const std::string & schema);
void write_rows(const std::string & path, const std::vector<json> & rows,
                const std::string & schema);

struct loaded_query {
    std::string id;
    chat_transcript messages;
    std::string question;  // last user message, used in adjudication prompts
    oracle_binding binding;
};

loaded_query load_query(const json & row, const std::string & where);

// Owns the provider stack for every configured role. Roles without their own
// [provider.NAME] section fall back to the default [provider] block; the
// judge is deliberately absent unless configured, so nothing adjudicates by
// accident.
class pipeline_context {
  public:
    explicit pipeline_context(run_config cfg);

    const run_config & cfg() const { return cfg_; }
    provider * get(const std::string & role);
    provider * get_judge();

  private:
    run_config cfg_;
    std::map<std::string, std::unique_ptr<provider>> cache_;
};

struct run_stats {
    size_t rows_in = 0;
    size_t rows_out = 0;
    size_t dropped = 0;
};

run_stats run_prefilter(pipeline_context & ctx, const std::string & queries_path,
                        const std::string & out_path);
run_stats run_pts_mine(pipeline_context & ctx, const std::string & queries_path,
                       const std::string & out_path);
run_stats run_plurality_filter(pipeline_context & ctx, const std::string & questions_path,
                               const std::string & out_path);
run_stats run_build_index(pipeline_context & ctx, const std::string & benchmarks_path,
                          const std::string & out_path);
run_stats run_decontam_scan(pipeline_context & ctx, const std::string & index_path,
                            const std::string & corpus_path, const std::string & out_path);
run_stats run_build_allowed(pipeline_context & ctx, const std::string & corpus_path,
                            const std::string & out_path);
run_stats run_refusal_build(pipeline_context & ctx, const std::string & seeds_path,
                            const std::string & out_sft_path, const std::string & out_dpo_path,
                            const std::string & records_path);
run_stats run_judge_label(pipeline_context & ctx, const std::string & prompts_path,
                          const std::string & out_path);
run_stats run_fim_carve(pipeline_context & ctx, const std::string & docs_path,
                        const std::string & out_path);
run_stats run_fim_sample(pipeline_context & ctx, const std::string & exercises_path,
                         const std::string & out_path);

}  // namespace pv
