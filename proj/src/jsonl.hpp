// JSONL row I/O. Rows are kept as ordered JSON objects so unknown fields
// and field order survive a read-modify-write cycle.

#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "chatml.hpp"

namespace pv {

using json = nlohmann::ordered_json;

// Reads every row of a JSONL file. Blank lines are skipped. A malformed
// line raises parse_error naming the 1-based line number.
std::vector<json> read_jsonl(const std::string & path);

// Writes rows as JSONL through an atomic rename.
void write_jsonl(const std::string & path, const std::vector<json> & rows);

// Field accessors that raise parse_error with the row context on a missing
// or mistyped field.
std::string get_string(const json & row, const std::string & key, const std::string & where);
std::string get_string_or(const json & row, const std::string & key, const std::string & fallback);
double      get_number(const json & row, const std::string & key, const std::string & where);

chat_transcript transcript_from_json(const json & messages, const std::string & where);
json            transcript_to_json(const chat_transcript & messages);

}  // namespace pv
