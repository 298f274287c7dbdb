#include "jsonl.hpp"

#include "common.hpp"

namespace pv {

std::vector<json> read_jsonl(const std::string & path) {
    std::vector<std::string> lines = read_lines(path);
    std::vector<json> rows;
    rows.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); i++) {
        std::string line = trim(lines[i]);
        if (line.empty()) {
            continue;
        }
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded()) {
            throw parse_error(path + ":" + std::to_string(i + 1) + ": malformed JSON row");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_jsonl(const std::string & path, const std::vector<json> & rows) {
    std::string out;
    for (const json & row : rows) {
        out += row.dump();
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::string get_string(const json & row, const std::string & key, const std::string & where) {
    if (!row.contains(key) || !row[key].is_string()) {
        throw parse_error(where + ": missing or non-string field '" + key + "'");
    }
    return row[key].get<std::string>();
}

std::string get_string_or(const json & row, const std::string & key, const std::string & fallback) {
    if (row.contains(key) && row[key].is_string()) {
        return row[key].get<std::string>();
    }
    return fallback;
}

double get_number(const json & row, const std::string & key, const std::string & where) {
    if (!row.contains(key) || !row[key].is_number()) {
        throw parse_error(where + ": missing or non-numeric field '" + key + "'");
    }
    return row[key].get<double>();
}

chat_transcript transcript_from_json(const json & messages, const std::string & where) {
    if (!messages.is_array() || messages.empty()) {
        throw parse_error(where + ": 'messages' must be a non-empty array");
    }
    chat_transcript out;
    for (const json & m : messages) {
        out.push_back({get_string(m, "role", where), get_string(m, "content", where)});
    }
    return out;
}

json transcript_to_json(const chat_transcript & messages) {
    json out = json::array();
    for (const chat_message & m : messages) {
        out.push_back(json{{"role", m.role}, {"content", m.content}});
    }
    return out;
}

}  // namespace pv
