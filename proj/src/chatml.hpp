// Chat transcript type and its wire form. The wire form brackets every
// message as <|im_start|>ROLE<|im_sep|>CONTENT<|im_end|>, with a newline
// after system and assistant messages to keep rounds visually grouped.

#pragma once

#include <string>
#include <vector>

namespace pv {

struct chat_message {
    std::string role;     // system | user | assistant
    std::string content;

    bool operator==(const chat_message & other) const = default;
};

using chat_transcript = std::vector<chat_message>;

inline constexpr const char * CHATML_START = "<|im_start|>";
inline constexpr const char * CHATML_SEP   = "<|im_sep|>";
inline constexpr const char * CHATML_END   = "<|im_end|>";

// Renders a transcript to prompt text. With open_assistant_stub the text
// ends in an unterminated assistant header, ready for a model to continue.
// Throws validation_error on unknown roles or marker strings in content.
std::string render_chatml(const chat_transcript & messages, bool open_assistant_stub = false);

// Inverse of render_chatml. A trailing assistant stub is accepted and
// reported through had_stub when non-null. Throws parse_error on text that
// render_chatml could not have produced.
chat_transcript parse_chatml(const std::string & text, bool * had_stub = nullptr);

// Request form of a one-shot prompt: one user message plus an open
// assistant header. The prompt rides along as opaque bytes, so adjudication
// prompts may quote transcript markers; never store the result as
// transcript data.
std::string render_prompt_context(const std::string & prompt);

}  // namespace pv
