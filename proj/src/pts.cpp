#include "pts.hpp"

#include <cmath>

#include "common.hpp"

namespace pv {

std::pair<token_seq, token_seq> split_segment(const token_seq & segment) {
    size_t len = segment.size();
    if (len < 2) {
        throw validation_error("split_segment: segment needs at least 2 tokens");
    }

    size_t left_len;
    if (!segment.has_logprobs()) {
        left_len = (len + 1) / 2;
    } else {
        double total = 0.0;
        for (const token & t : segment.tokens) {
            total += *t.logprob;
        }
        double target = total / 2.0;
        double cumulative = 0.0;
        double best_score = 0.0;
        size_t best_cut = 0;
        for (size_t j = 0; j + 1 < len; j++) {
            cumulative += *segment.tokens[j].logprob;
            double score = std::fabs(cumulative - target);
            if (j == 0 || score < best_score) {
                best_score = score;
                best_cut = j;
            }
        }
        left_len = best_cut + 1;
    }
    return {segment.slice(0, left_len), segment.slice(left_len, len)};
}

pts_engine::pts_engine(pts_query query, provider * prov, rollout_scorer scorer,
                       const pts_settings & cfg, int threads)
    : query_(std::move(query)),
      provider_(prov),
      scorer_(std::move(scorer)),
      cfg_(cfg),
      threads_(threads < 1 ? 1 : threads) {
    if (provider_ == nullptr) {
        throw validation_error("pts_engine: provider required");
    }
    if (!scorer_) {
        throw validation_error("pts_engine: scorer required");
    }
}

static std::string prefix_key(const token_seq & prefix) {
    std::string key;
    for (const token & t : prefix.tokens) {
        key += t.text;
        key += '\x1f';
    }
    return key;
}

const success_estimate & pts_engine::estimate(const token_seq & prefix) {
    std::string key = prefix_key(prefix);
    if (memo_enabled_) {
        std::lock_guard<std::mutex> lock(memo_mutex_);
        auto it = memo_.find(key);
        if (it != memo_.end()) {
            return it->second;
        }
    }

    success_estimate est = compute_estimate(prefix);

    std::lock_guard<std::mutex> lock(memo_mutex_);
    if (!memo_enabled_) {
        unmemoized_.push_back(std::make_unique<success_estimate>(std::move(est)));
        return *unmemoized_.back();
    }
    auto [it, inserted] = memo_.emplace(std::move(key), std::move(est));
    // first writer wins; a racing duplicate computed the identical estimate anyway
    return it->second;
}

success_estimate pts_engine::compute_estimate(const token_seq & prefix) {
    completion_request req;
    req.context = query_.context + prefix.text();
    req.n = cfg_.n_rollouts;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;

    std::vector<token_seq> rollouts = provider_->sample_completions(req);
    calls_.fetch_add(1);

    // the oracle judges the whole response after the query context, not the
    // continuation alone: a prefix may already contain the final answer
    std::vector<char> ok(rollouts.size(), 0);
    parallel_for(rollouts.size(), threads_, [&](size_t i) {
        ok[i] = scorer_(token_seq::concat(prefix, rollouts[i]), (int) i) ? 1 : 0;
    });

    success_estimate est;
    est.n_samples = (int) rollouts.size();
    for (size_t i = 0; i < rollouts.size(); i++) {
        est.n_success += ok[i];
        if (!rollouts[i].empty()) {
            first_token_stat & stat = est.first_tokens[rollouts[i].tokens[0].text];
            stat.n++;
            stat.successes += ok[i];
        }
    }
    est.p = est.n_samples > 0 ? (double) est.n_success / est.n_samples : 0.0;
    return est;
}

std::vector<token_seq> pts_engine::sample_completions(int n) {
    completion_request req;
    req.context = query_.context;
    req.n = n;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_tokens;
    return provider_->sample_completions(req);
}

void pts_engine::subdivide(const token_seq & prefix, const token_seq & segment,
                           std::vector<token_seq> & out) {
    if (segment.size() <= 1) {
        out.push_back(segment);
        return;
    }
    double p_before = estimate(prefix).p;
    double p_after = estimate(token_seq::concat(prefix, segment)).p;
    if (std::fabs(p_after - p_before) < cfg_.p_gap) {
        out.push_back(segment);
        return;
    }
    auto [left, right] = split_segment(segment);
    subdivide(prefix, left, out);
    subdivide(token_seq::concat(prefix, left), right, out);
}

std::vector<pivotal_token_hit> pts_engine::find_pivotal_tokens(const token_seq & t_full) {
    if (t_full.empty()) {
        throw validation_error("find_pivotal_tokens: empty completion");
    }
    std::vector<token_seq> segments;
    subdivide(token_seq{}, t_full, segments);

    std::vector<pivotal_token_hit> hits;
    token_seq prefix;
    for (const token_seq & segment : segments) {
        if (segment.size() == 1) {
            double p_before = estimate(prefix).p;
            double p_after = estimate(token_seq::concat(prefix, segment)).p;
            if (std::fabs(p_after - p_before) >= cfg_.p_gap) {
                hits.push_back({query_.id, prefix, segment.tokens[0], p_before, p_after});
            }
        }
        prefix = token_seq::concat(prefix, segment);
    }
    return hits;
}

std::vector<preference_pair> pts_engine::build_preference_pairs(const pivotal_token_hit & pivot) {
    const success_estimate & est = estimate(pivot.prefix);

    bool have_acc = false;
    bool have_rej = false;
    std::string acc_token;
    std::string rej_token;
    double p_acc = 0.0;
    double p_rej = 0.0;
    for (const auto & [text, stat] : est.first_tokens) {
        if (stat.n < cfg_.min_support) {
            continue;
        }
        double p = stat.p();
        if (!have_acc || p > p_acc) {
            have_acc = true;
            p_acc = p;
            acc_token = text;
        }
        if (!have_rej || p < p_rej) {
            have_rej = true;
            p_rej = p;
            rej_token = text;
        }
    }

    std::vector<preference_pair> pairs;
    if (!have_acc || !have_rej || acc_token == rej_token) {
        return pairs;
    }
    if (p_acc - p_rej < cfg_.p_gap) {
        return pairs;
    }
    if (!(p_acc > est.p && est.p > p_rej)) {
        return pairs;
    }

    preference_pair pair;
    pair.query_id = pivot.query_id;
    pair.context = query_.context + pivot.prefix.text();
    pair.accepted = acc_token;
    pair.rejected = rej_token;
    pair.kind = "pivotal_single_token";
    pair.p_before = est.p;
    pair.p_acc = p_acc;
    pair.p_rej = p_rej;
    pairs.push_back(std::move(pair));
    return pairs;
}

bool prefilter_keep(double p, const pts_settings & cfg) {
    return p >= cfg.prefilter_lo && p <= cfg.prefilter_hi;
}

std::vector<pts_query> prefilter_queries(
    const std::vector<pts_query> & queries, provider * prov,
    const std::function<rollout_scorer(const pts_query &)> & scorer_for,
    const pts_settings & cfg, int threads) {
    std::vector<pts_query> kept;
    for (const pts_query & q : queries) {
        pts_engine engine(q, prov, scorer_for(q), cfg, threads);
        if (prefilter_keep(engine.estimate(token_seq{}).p, cfg)) {
            kept.push_back(q);
        }
    }
    return kept;
}

}  // namespace pv
