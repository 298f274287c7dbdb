#include "common.hpp"

#include <atomic>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace pv {

// ==== strings ====

static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(s[b])) {
        b++;
    }
    while (e > b && is_space(s[e - 1])) {
        e--;
    }
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char & c : out) {
        c = (char) std::tolower((unsigned char) c);
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) {
            i++;
        }
        size_t b = i;
        while (i < s.size() && !is_space(s[i])) {
            i++;
        }
        if (i > b) {
            out.emplace_back(s.substr(b, i - b));
        }
    }
    return out;
}

std::string join(const std::vector<std::string> & parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); i++) {
        if (i > 0) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) {
        return s;
    }
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string first_n_words(std::string_view s, size_t n) {
    std::vector<std::string> words = split_whitespace(s);
    if (words.size() > n) {
        words.resize(n);
    }
    return join(words, " ");
}

// ==== files ====

std::string read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw infra_error("cannot open file for reading: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw infra_error("read failed: " + path);
    }
    return ss.str();
}

std::optional<std::string> read_file_if_exists(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw infra_error("read failed: " + path);
    }
    return ss.str();
}

void atomic_write_file(const std::string & path, std::string_view content) {
    // keep the temp file in the same directory so rename() stays atomic
    static std::atomic<uint64_t> counter{0};
    std::string tmp = path + ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw infra_error("cannot open file for writing: " + tmp);
        }
        out.write(content.data(), (std::streamsize) content.size());
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw infra_error("write failed: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        int err = errno;
        std::remove(tmp.c_str());
        throw infra_error("rename failed for " + path + ": " + std::strerror(err));
    }
}

std::vector<std::string> read_lines(const std::string & path) {
    std::string content = read_file(path);
    std::vector<std::string> lines = split(content, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    for (std::string & l : lines) {
        if (!l.empty() && l.back() == '\r') {
            l.pop_back();
        }
    }
    return lines;
}

// ==== parallel_for ====

void parallel_for(size_t n, int n_threads, const std::function<void(size_t)> & fn) {
    if (n == 0) {
        return;
    }
    size_t workers = n_threads > 0 ? (size_t) n_threads : 1;
    if (workers > n) {
        workers = n;
    }
    if (workers == 1) {
        for (size_t i = 0; i < n; i++) {
            fn(i);
        }
        return;
    }

    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error) {
                    return;
                }
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t t = 0; t < workers; t++) {
        threads.emplace_back(worker);
    }
    for (std::thread & t : threads) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace pv
