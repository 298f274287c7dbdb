#include "chatml.hpp"

#include "common.hpp"

namespace pv {

static bool known_role(const std::string & role) {
    return role == "system" || role == "user" || role == "assistant";
}

// a newline separates a message from its predecessor when the predecessor
// closed a round half: after system and after assistant turns
static bool newline_after(const std::string & prev_role) {
    return prev_role == "system" || prev_role == "assistant";
}

std::string render_chatml(const chat_transcript & messages, bool open_assistant_stub) {
    std::string out;
    for (size_t i = 0; i < messages.size(); i++) {
        const chat_message & m = messages[i];
        if (!known_role(m.role)) {
            throw validation_error("render_chatml: unknown role '" + m.role + "'");
        }
        if (m.content.find(CHATML_START) != std::string::npos ||
            m.content.find(CHATML_SEP) != std::string::npos ||
            m.content.find(CHATML_END) != std::string::npos) {
            throw validation_error("render_chatml: content contains a transcript marker");
        }
        if (i > 0 && newline_after(messages[i - 1].role)) {
            out += '\n';
        }
        out += CHATML_START;
        out += m.role;
        out += CHATML_SEP;
        out += m.content;
        out += CHATML_END;
    }
    if (open_assistant_stub) {
        if (!messages.empty() && newline_after(messages.back().role)) {
            out += '\n';
        }
        out += CHATML_START;
        out += "assistant";
        out += CHATML_SEP;
    }
    return out;
}

std::string render_prompt_context(const std::string & prompt) {
    std::string out;
    out += CHATML_START;
    out += "user";
    out += CHATML_SEP;
    out += prompt;
    out += CHATML_END;
    out += CHATML_START;
    out += "assistant";
    out += CHATML_SEP;
    return out;
}

chat_transcript parse_chatml(const std::string & text, bool * had_stub) {
    const std::string start = CHATML_START;
    const std::string sep   = CHATML_SEP;
    const std::string end   = CHATML_END;

    chat_transcript out;
    if (had_stub) {
        *had_stub = false;
    }
    size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && text[pos] == '\n') {
            pos++;
        }
        if (pos == text.size()) {
            break;
        }
        if (text.compare(pos, start.size(), start) != 0) {
            throw parse_error("parse_chatml: expected message start at offset " + std::to_string(pos));
        }
        pos += start.size();
        size_t sep_pos = text.find(sep, pos);
        if (sep_pos == std::string::npos) {
            throw parse_error("parse_chatml: message header is missing its separator");
        }
        std::string role = text.substr(pos, sep_pos - pos);
        if (!known_role(role)) {
            throw parse_error("parse_chatml: unknown role '" + role + "'");
        }
        pos = sep_pos + sep.size();
        size_t end_pos = text.find(end, pos);
        if (end_pos == std::string::npos) {
            // an unterminated assistant header at the end of the text is the
            // open stub; anything else is truncation
            if (role == "assistant" && pos == text.size()) {
                if (had_stub) {
                    *had_stub = true;
                }
                return out;
            }
            throw parse_error("parse_chatml: unterminated message for role '" + role + "'");
        }
        std::string content = text.substr(pos, end_pos - pos);
        if (content.find(start) != std::string::npos) {
            throw parse_error("parse_chatml: nested message start inside content");
        }
        out.push_back({role, content});
        pos = end_pos + end.size();
    }
    return out;
}

}  // namespace pv
