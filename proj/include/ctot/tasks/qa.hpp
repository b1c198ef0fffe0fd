#pragma once

#include <optional>
#include <string_view>

#include "ctot/tasks/parse.hpp"
#include "ctot/thought.hpp"

namespace ctot {

struct QaAnswer {
    char letter;
    ThoughtId source_thought;
};

/// Letter from the last line that begins with "###"; only A-E count.
inline std::optional<char> qa_parse(std::string_view text) {
    std::optional<std::string_view> last;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = trim(text.substr(pos, end - pos));
        if (line.starts_with("###")) last = line;
        pos = end + 1;
    }
    if (!last) return std::nullopt;
    auto body = trim(last->substr(3));
    if (body.empty()) return std::nullopt;
    const char c = body.front();
    if (c < 'A' || c > 'E') return std::nullopt;
    // "###A" or "###A." but not "###Apple"
    if (body.size() > 1 && ((body[1] >= 'A' && body[1] <= 'Z') || (body[1] >= 'a' && body[1] <= 'z'))) return std::nullopt;
    return c;
}

} // namespace ctot
