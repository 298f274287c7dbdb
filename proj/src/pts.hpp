#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "oracle.hpp"
#include "provider.hpp"

namespace pv {

struct pts_query {
    std::string id;
    std::string context;  // rendered prompt text, usually chatml ending in an assistant stub
    oracle_binding binding;
};

struct first_token_stat {
    int n = 0;
    int successes = 0;

    double p() const { return n > 0 ? (double) successes / n : 0.0; }
};

struct success_estimate {
    int n_samples = 0;
    int n_success = 0;
    double p = 0.0;
    // success stats keyed by the first token of each rollout, map for stable iteration order
    std::map<std::string, first_token_stat> first_tokens;
};

struct pivotal_token_hit {
    std::string query_id;
    token_seq prefix;
    token tok;
    double p_before = 0.0;
    double p_after = 0.0;

    double delta() const { return p_after - p_before; }
};

struct preference_pair {
    std::string query_id;
    std::string context;
    std::string accepted;
    std::string rejected;
    std::string kind;  // pivotal_single_token | judge_full_length
    double p_before = 0.0;
    double p_acc = 0.0;
    double p_rej = 0.0;
};

// cut point minimizing distance to half the cumulative logprob mass, count midpoint fallback
std::pair<token_seq, token_seq> split_segment(const token_seq & segment);

class pts_engine {
  public:
    pts_engine(pts_query query, provider * prov, rollout_scorer scorer, const pts_settings & cfg,
               int threads = 1);

    const success_estimate & estimate(const token_seq & prefix);
    std::vector<token_seq> sample_completions(int n);
    std::vector<pivotal_token_hit> find_pivotal_tokens(const token_seq & t_full);
    std::vector<preference_pair> build_preference_pairs(const pivotal_token_hit & pivot);

    const pts_query & query() const { return query_; }
    void disable_memo() { memo_enabled_ = false; }
    int sampling_calls() const { return calls_.load(); }

  private:
    success_estimate compute_estimate(const token_seq & prefix);
    void subdivide(const token_seq & prefix, const token_seq & segment,
                   std::vector<token_seq> & out);

    pts_query query_;
    provider * provider_;
    rollout_scorer scorer_;
    pts_settings cfg_;
    int threads_;
    bool memo_enabled_ = true;
    std::mutex memo_mutex_;
    std::map<std::string, success_estimate> memo_;
    std::vector<std::unique_ptr<success_estimate>> unmemoized_;
    std::atomic<int> calls_{0};
};

bool prefilter_keep(double p, const pts_settings & cfg);

// keeps queries whose empty-prefix success estimate lies inside the band, in input order
std::vector<pts_query> prefilter_queries(
    const std::vector<pts_query> & queries, provider * prov,
    const std::function<rollout_scorer(const pts_query &)> & scorer_for,
    const pts_settings & cfg, int threads = 1);

}  // namespace pv
