#include "provider.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <semaphore>
#include <thread>

#include "common.hpp"
#include "simulator.hpp"

namespace pv {

namespace fs = std::filesystem;
using njson = nlohmann::ordered_json;

// ==== token_seq ====

std::string token_seq::text() const {
    std::string out;
    for (const token & t : tokens) {
        out += t.text;
    }
    return out;
}

bool token_seq::has_logprobs() const {
    for (const token & t : tokens) {
        if (!t.logprob.has_value()) {
            return false;
        }
    }
    return true;
}

token_seq token_seq::prefix(size_t n) const {
    return slice(0, n);
}

token_seq token_seq::slice(size_t begin, size_t end) const {
    if (begin > end || end > tokens.size()) {
        throw validation_error("token_seq::slice: range out of bounds");
    }
    token_seq out;
    out.tokens.assign(tokens.begin() + (ptrdiff_t) begin, tokens.begin() + (ptrdiff_t) end);
    return out;
}

token_seq token_seq::concat(const token_seq & a, const token_seq & b) {
    token_seq out = a;
    out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
    return out;
}

// ==== completion_request ====

void completion_request::validate() const {
    if (n < 1) {
        throw validation_error("completion_request: n must be >= 1");
    }
    if (temperature < 0.0) {
        throw validation_error("completion_request: temperature must be >= 0");
    }
    if (max_tokens < 1) {
        throw validation_error("completion_request: max_tokens must be >= 1");
    }
}

uint64_t completion_request::content_hash() const {
    uint64_t h = fnv1a64(context);
    h = fnv1a64("\x1fn=" + std::to_string(n), h);
    h = fnv1a64("\x1ft=" + std::to_string(temperature), h);
    h = fnv1a64("\x1fm=" + std::to_string(max_tokens), h);
    for (const std::string & s : stop) {
        h = fnv1a64("\x1fs=" + s, h);
    }
    if (seed) {
        h = fnv1a64("\x1fseed=" + std::to_string(*seed), h);
    }
    h = fnv1a64(want_logprobs ? "\x1flp=1" : "\x1flp=0", h);
    return h;
}

// ==== http provider ====

namespace {

struct split_url {
    std::string host;  // scheme://authority
    std::string path;  // leading path, no trailing slash
};

split_url parse_base_url(const std::string & base_url) {
    size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw validation_error("provider.base_url must include a scheme: " + base_url);
    }
    size_t path_start = base_url.find('/', scheme + 3);
    split_url out;
    if (path_start == std::string::npos) {
        out.host = base_url;
    } else {
        out.host = base_url.substr(0, path_start);
        out.path = base_url.substr(path_start);
    }
    while (!out.path.empty() && out.path.back() == '/') {
        out.path.pop_back();
    }
    return out;
}

class http_provider final : public provider {
public:
    explicit http_provider(const provider_settings & settings) : settings_(settings) {
        url_ = parse_base_url(settings.base_url);
        if (!settings.api_key_env.empty()) {
            const char * key = std::getenv(settings.api_key_env.c_str());
            if (key != nullptr) {
                api_key_ = key;
            }
        }
    }

    std::vector<token_seq> sample_completions(const completion_request & req) override {
        req.validate();
        njson body = build_body(req);
        std::string endpoint = url_.path + (settings_.api_style == "chat"
                                                ? "/chat/completions"
                                                : "/completions");
        njson reply = post_with_retries(endpoint, body);
        return parse_reply(reply, req);
    }

private:
    njson build_body(const completion_request & req) const {
        njson body;
        body["model"] = settings_.model;
        if (settings_.api_style == "chat") {
            // the context is already rendered text; wrap it as one user turn
            body["messages"] = njson::array({njson{{"role", "user"}, {"content", req.context}}});
        } else {
            body["prompt"] = req.context;
        }
        body["temperature"] = req.temperature;
        body["n"] = req.n;
        body["max_tokens"] = req.max_tokens;
        if (!req.stop.empty()) {
            body["stop"] = req.stop;
        }
        if (req.seed) {
            body["seed"] = *req.seed;
        }
        if (req.want_logprobs) {
            body["logprobs"] = settings_.api_style == "chat" ? njson(true) : njson(1);
        }
        return body;
    }

    njson post_with_retries(const std::string & endpoint, const njson & body) {
        std::string last_failure = "no attempt made";
        for (int attempt = 1; attempt <= settings_.max_attempts; attempt++) {
            if (attempt > 1) {
                int delay = settings_.backoff_ms << (attempt - 2);
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            httplib::Client client(url_.host);
            client.set_connection_timeout(std::chrono::milliseconds(settings_.timeout_ms));
            client.set_read_timeout(std::chrono::milliseconds(settings_.timeout_ms));
            httplib::Headers headers;
            if (!api_key_.empty()) {
                headers.emplace("Authorization", "Bearer " + api_key_);
            }
            httplib::Result res = client.Post(endpoint, headers, body.dump(), "application/json");
            if (!res) {
                last_failure = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_failure = "status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw transport_error("provider request failed with status " +
                                      std::to_string(res->status) + " (not retryable): " +
                                      res->body);
            }
            njson reply = njson::parse(res->body, nullptr, false);
            if (reply.is_discarded()) {
                throw parse_error("provider returned malformed JSON");
            }
            return reply;
        }
        throw transport_error("provider unreachable after " +
                              std::to_string(settings_.max_attempts) +
                              " attempts; last failure: " + last_failure);
    }

    std::vector<token_seq> parse_reply(const njson & reply, const completion_request & req) const {
        if (!reply.contains("choices") || !reply["choices"].is_array()) {
            throw parse_error("provider reply has no choices array");
        }
        std::vector<token_seq> out;
        for (const njson & choice : reply["choices"]) {
            out.push_back(parse_choice(choice));
        }
        if ((int) out.size() != req.n) {
            throw parse_error("provider returned " + std::to_string(out.size()) +
                              " choices, expected " + std::to_string(req.n));
        }
        return out;
    }

    token_seq parse_choice(const njson & choice) const {
        token_seq seq;
        if (settings_.api_style == "chat") {
            // token-level detail lives in choices[i].logprobs.content
            if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
                choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
                for (const njson & t : choice["logprobs"]["content"]) {
                    token tok;
                    tok.text = t.value("token", "");
                    if (t.contains("logprob") && t["logprob"].is_number()) {
                        tok.logprob = t["logprob"].get<double>();
                    }
                    seq.tokens.push_back(std::move(tok));
                }
                return seq;
            }
            std::string text;
            if (choice.contains("message") && choice["message"].is_object()) {
                text = choice["message"].value("content", "");
            }
            if (!text.empty()) {
                seq.tokens.push_back({text, std::nullopt});
            }
            return seq;
        }
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("tokens") && choice["logprobs"]["tokens"].is_array()) {
            const njson & toks = choice["logprobs"]["tokens"];
            const njson * lps = nullptr;
            if (choice["logprobs"].contains("token_logprobs") &&
                choice["logprobs"]["token_logprobs"].is_array()) {
                lps = &choice["logprobs"]["token_logprobs"];
            }
            for (size_t i = 0; i < toks.size(); i++) {
                token tok;
                tok.text = toks[i].is_string() ? toks[i].get<std::string>() : "";
                if (lps && i < lps->size() && (*lps)[i].is_number()) {
                    tok.logprob = (*lps)[i].get<double>();
                }
                seq.tokens.push_back(std::move(tok));
            }
            return seq;
        }
        std::string text = choice.value("text", "");
        if (!text.empty()) {
            seq.tokens.push_back({text, std::nullopt});
        }
        return seq;
    }

    provider_settings settings_;
    split_url url_;
    std::string api_key_;
};

// ==== record/replay cache ====

njson seqs_to_json(const std::vector<token_seq> & seqs) {
    njson out = njson::array();
    for (const token_seq & seq : seqs) {
        njson jseq = njson::array();
        for (const token & t : seq.tokens) {
            njson jt;
            jt["text"] = t.text;
            if (t.logprob) {
                jt["logprob"] = *t.logprob;
            }
            jseq.push_back(std::move(jt));
        }
        out.push_back(std::move(jseq));
    }
    return out;
}

std::vector<token_seq> seqs_from_json(const njson & arr, const std::string & where) {
    if (!arr.is_array()) {
        throw parse_error(where + ": cached sequences must be an array");
    }
    std::vector<token_seq> out;
    for (const njson & jseq : arr) {
        if (!jseq.is_array()) {
            throw parse_error(where + ": cached sequence must be an array of tokens");
        }
        token_seq seq;
        for (const njson & jt : jseq) {
            token t;
            t.text = jt.value("text", "");
            if (jt.contains("logprob") && jt["logprob"].is_number()) {
                t.logprob = jt["logprob"].get<double>();
            }
            seq.tokens.push_back(std::move(t));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

class caching_provider final : public provider {
public:
    caching_provider(std::unique_ptr<provider> inner, std::string cache_dir, std::string mode)
        : inner_(std::move(inner)), dir_(std::move(cache_dir)), mode_(std::move(mode)) {
        if (mode_ != "record" && mode_ != "replay") {
            throw validation_error("cache mode must be record or replay, got '" + mode_ + "'");
        }
        if (mode_ == "record" && !inner_) {
            throw validation_error("record cache mode needs a live provider");
        }
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec && !fs::is_directory(dir_)) {
            throw infra_error("cannot create cache directory: " + dir_);
        }
    }

    std::vector<token_seq> sample_completions(const completion_request & req) override {
        req.validate();
        char name[32];
        snprintf(name, sizeof(name), "%016llx.json", (unsigned long long) req.content_hash());
        std::string path = dir_ + "/" + name;

        std::optional<std::string> cached = read_file_if_exists(path);
        if (cached) {
            njson entry = njson::parse(*cached, nullptr, false);
            if (entry.is_discarded()) {
                throw parse_error("cache entry is malformed JSON: " + path);
            }
            return seqs_from_json(entry["sequences"], path);
        }
        if (mode_ == "replay") {
            throw infra_error("replay cache miss for request hash " + std::string(name) +
                              " (context starts: " + req.context.substr(0, 60) + ")");
        }
        std::vector<token_seq> seqs = inner_->sample_completions(req);
        njson entry;
        entry["request"] = njson{{"context", req.context},
                                 {"n", req.n},
                                 {"temperature", req.temperature},
                                 {"max_tokens", req.max_tokens},
                                 {"stop", req.stop}};
        if (req.seed) {
            entry["request"]["seed"] = *req.seed;
        }
        entry["sequences"] = seqs_to_json(seqs);
        atomic_write_file(path, entry.dump(2));
        return seqs;
    }

private:
    std::unique_ptr<provider> inner_;
    std::string dir_;
    std::string mode_;
};

// ==== in-flight limiter ====

class limited_provider final : public provider {
public:
    limited_provider(std::unique_ptr<provider> inner, int max_in_flight)
        : inner_(std::move(inner)), slots_(max_in_flight) {
        if (max_in_flight < 1) {
            throw validation_error("max_in_flight must be >= 1");
        }
    }

    std::vector<token_seq> sample_completions(const completion_request & req) override {
        slots_.acquire();
        try {
            std::vector<token_seq> out = inner_->sample_completions(req);
            slots_.release();
            return out;
        } catch (...) {
            slots_.release();
            throw;
        }
    }

private:
    std::unique_ptr<provider> inner_;
    std::counting_semaphore<> slots_;
};

}  // namespace

std::unique_ptr<provider> make_http_provider(const provider_settings & settings) {
    return std::make_unique<http_provider>(settings);
}

std::unique_ptr<provider> make_caching_provider(std::unique_ptr<provider> inner,
                                                const std::string & cache_dir,
                                                const std::string & mode) {
    return std::make_unique<caching_provider>(std::move(inner), cache_dir, mode);
}

std::unique_ptr<provider> make_limited_provider(std::unique_ptr<provider> inner,
                                                int max_in_flight) {
    return std::make_unique<limited_provider>(std::move(inner), max_in_flight);
}

std::unique_ptr<provider> make_provider(const provider_settings & settings, uint64_t global_seed) {
    std::unique_ptr<provider> p;
    if (settings.kind == "simulator") {
        if (settings.simulator_spec.empty()) {
            throw validation_error("provider.simulator_spec required for simulator providers");
        }
        p = make_simulator_provider(load_simulator_spec(settings.simulator_spec), global_seed);
    } else if (settings.kind == "http") {
        if (settings.base_url.empty()) {
            throw validation_error("provider.base_url required for http providers");
        }
        p = make_http_provider(settings);
    } else if (settings.kind == "replay") {
        if (settings.cache_dir.empty()) {
            throw validation_error("provider.cache_dir required for replay providers");
        }
        return make_caching_provider(nullptr, settings.cache_dir, "replay");
    } else {
        throw validation_error("unknown provider kind '" + settings.kind + "'");
    }
    if (settings.cache_mode == "record") {
        p = make_caching_provider(std::move(p), settings.cache_dir, "record");
    } else if (settings.cache_mode == "replay") {
        p = make_caching_provider(std::move(p), settings.cache_dir, "replay");
    }
    if (settings.kind == "http" && settings.max_in_flight > 0) {
        p = make_limited_provider(std::move(p), settings.max_in_flight);
    }
    return p;
}

}  // namespace pv
