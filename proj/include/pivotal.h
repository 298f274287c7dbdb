/*
 * pivotal - data engineering toolkit for LLM post-training.
 *
 * C interface to the pivotal core library. All functions return a
 * pv_status code; on failure pv_last_error() returns a thread-local
 * message describing what went wrong. Strings returned through out
 * parameters are heap-allocated and must be released with
 * pv_string_free().
 */

#ifndef PIVOTAL_H
#define PIVOTAL_H

#include <stdint.h>

#if defined(_WIN32)
#  define PV_API __declspec(dllexport)
#else
#  ifdef PV_BUILD_SHARED
#    define PV_API __attribute__((visibility("default")))
#  else
#    define PV_API
#  endif
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pv_status {
    PV_OK             = 0,
    PV_ERR_VALIDATION = 1,  /* bad input, config, or arguments         */
    PV_ERR_INFRA      = 2,  /* sandbox, filesystem, or provider outage */
    PV_ERR_PARSE      = 3,  /* malformed file or model reply           */
    PV_ERR_TRANSPORT  = 4,  /* network failure after retries           */
    PV_ERR_UNKNOWN    = 5
} pv_status;

/* Message for the most recent failure on this thread. Never NULL. */
PV_API const char * pv_last_error(void);

/* Release a string returned by any pv_* out parameter. NULL is a no-op. */
PV_API void pv_string_free(char * s);

PV_API const char * pv_version(void);

/* ---- configuration ------------------------------------------------- */

/* Opaque run configuration: provider endpoints, seeds, module knobs. */
typedef struct pv_config pv_config;

PV_API pv_status pv_config_default(pv_config ** out);
PV_API pv_status pv_config_load(const char * path, pv_config ** out);
/* Override one key, e.g. pv_config_set(cfg, "pts.p_gap", "0.25"). */
PV_API pv_status pv_config_set(pv_config * cfg, const char * key, const char * value);
PV_API pv_status pv_config_get(const pv_config * cfg, const char * key, char ** out_value);
PV_API void      pv_config_free(pv_config * cfg);

/* ---- pure operations ------------------------------------------------ */

/* F1 for short-answer evals that allow refusals.
 * precision = correct / (correct + incorrect), recall = correct / total. */
PV_API pv_status pv_eval_f1(uint64_t n_correct, uint64_t n_incorrect,
                            uint64_t n_refused, double * out_f1);

/* Score one 25-question multiple-choice contest. choices and key are
 * 25-character strings of A..E, with '-' marking a blank in choices. */
PV_API pv_status pv_amc_score(const char * choices, const char * key, double * out_score);

/* Multiple-choice contest prompt for one question. options_json is a JSON
 * array of the five option texts in A..E order. */
PV_API pv_status pv_amc_prompt(const char * question, const char * options_json, char ** out);

/* Final answer choice in a worked solution: 'A'..'E', or '-' when the
 * solution declines to answer or names no choice. */
PV_API pv_status pv_extract_choice(const char * solution, char * out_choice);

/* Epochs per source for a token-budget mixture plan. plan_json holds
 * {"horizon_tokens": H, "sources": [{"name", "fraction", "unique_tokens"}]};
 * the result maps each source name to fraction * H / unique_tokens. */
PV_API pv_status pv_mixture_epochs(const char * plan_json, char ** out_json);

/* Render a chat transcript to prompt text. messages_json is a JSON array
 * of {"role", "content"}. open_assistant_stub != 0 appends an unterminated
 * assistant header so a model can continue the transcript. */
PV_API pv_status pv_render_chatml(const char * messages_json, int open_assistant_stub,
                                  char ** out_text);

/* Inverse of pv_render_chatml for complete transcripts. */
PV_API pv_status pv_parse_chatml(const char * text, char ** out_messages_json);

/* Decontamination token stream for a document, as a JSON array of strings. */
PV_API pv_status pv_normalize_tokens(const char * text, char ** out_json);

/* Plurality vote over sampled answers. answers_json is a JSON array of
 * strings; the result carries the plurality answer, its count, and the
 * keep / discard_too_easy / discard_inconsistent decision. */
PV_API pv_status pv_plurality_filter(const char * question, const char * answers_json,
                                     char ** out_bundle_json);

/* Carve a fill-in-the-middle exercise out of a document. policy is "code"
 * or "prose". Yields PV_OK with *out_json = NULL when the document has no
 * span worth carving. */
PV_API pv_status pv_fim_carve(const char * doc_text, const char * policy,
                              uint64_t seed, char ** out_json);

/* ---- decontamination index ------------------------------------------ */

/* Opaque n-gram index over benchmark test sets. */
typedef struct pv_index pv_index;

/* Build from a benchmarks JSONL file of {"benchmark", "id", "text"} rows.
 * cfg's [decontam] benchmarks list selects which rows are admitted; pass
 * NULL to admit every row. */
PV_API pv_status pv_index_build(const pv_config * cfg, const char * benchmarks_jsonl,
                                pv_index ** out);
PV_API pv_status pv_index_save(const pv_index * idx, const char * path);
PV_API pv_status pv_index_load(const char * path, pv_index ** out);
PV_API void      pv_index_free(pv_index * idx);

/* Contamination report for one document, as a JSON object. Thresholds and
 * the allowed 13-gram list come from cfg ([decontam] section). */
PV_API pv_status pv_index_check(const pv_index * idx, const pv_config * cfg,
                                const char * doc_text, char ** out_report_json);

/* ---- pipeline entry points ------------------------------------------ */
/* File-to-file runs used by the CLI. Input and output are JSONL unless
 * noted. Provider choice, seeds, and module knobs come from cfg. Every run
 * can report row counts through out_stats: a JSON object
 * {"rows_in", "rows_out", "dropped"}; pass NULL when not wanted. */

PV_API pv_status pv_run_prefilter(const pv_config * cfg, const char * queries_jsonl,
                                  const char * out_jsonl, char ** out_stats);
PV_API pv_status pv_run_pts_mine(const pv_config * cfg, const char * queries_jsonl,
                                 const char * out_pairs_jsonl, char ** out_stats);
PV_API pv_status pv_run_plurality_filter(const pv_config * cfg, const char * questions_jsonl,
                                         const char * out_bundles_jsonl, char ** out_stats);
PV_API pv_status pv_run_decontam_scan(const pv_config * cfg, const char * index_path,
                                      const char * corpus_jsonl, const char * out_reports_jsonl,
                                      char ** out_stats);
PV_API pv_status pv_run_build_allowed(const pv_config * cfg, const char * corpus_jsonl,
                                      const char * out_allowed_txt, char ** out_stats);
PV_API pv_status pv_run_refusal_build(const pv_config * cfg, const char * seeds_jsonl,
                                      const char * out_sft_jsonl, const char * out_dpo_jsonl,
                                      const char * out_records_jsonl_or_null, char ** out_stats);
PV_API pv_status pv_run_judge_label(const pv_config * cfg, const char * prompts_jsonl,
                                    const char * out_pairs_jsonl, char ** out_stats);
PV_API pv_status pv_run_fim_carve(const pv_config * cfg, const char * docs_jsonl,
                                  const char * out_exercises_jsonl, char ** out_stats);
PV_API pv_status pv_run_fim_sample(const pv_config * cfg, const char * exercises_jsonl,
                                   const char * out_solutions_jsonl, char ** out_stats);

#ifdef __cplusplus
}
#endif

#endif /* PIVOTAL_H */
