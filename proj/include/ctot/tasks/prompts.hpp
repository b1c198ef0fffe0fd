#pragma once

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ctot/oracle.hpp"
#include "ctot/tasks/templates.hpp"

namespace ctot {

enum class TaskKind { qa, game24, sudoku };

inline const char* to_string(TaskKind k) {
    switch (k) {
    case TaskKind::qa: return "qa";
    case TaskKind::game24: return "game24";
    case TaskKind::sudoku: return "sudoku";
    }
    return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
    if (s == "qa") return TaskKind::qa;
    if (s == "game24" || s == "24") return TaskKind::game24;
    if (s == "sudoku") return TaskKind::sudoku;
    return std::nullopt;
}

/// Single left-to-right pass; substituted values are never rescanned, so
/// thought text containing "{input_2}" stays literal.
inline std::string fill_template(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tpl.size() + 64);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            const auto close = tpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = values.find(tpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tpl[i++];
    }
    return out;
}

inline std::string_view comparison_template(TaskKind task, int variant) {
    static constexpr std::array<std::string_view, 3> qa{templates::qa_compare_1, templates::qa_compare_2,
                                                        templates::qa_compare_3};
    static constexpr std::array<std::string_view, 3> g24{templates::game24_compare_1, templates::game24_compare_2,
                                                         templates::game24_compare_3};
    static constexpr std::array<std::string_view, 3> sdk{templates::sudoku_compare_1, templates::sudoku_compare_2,
                                                         templates::sudoku_compare_3};
    if (variant < 1 || variant > 3) throw std::invalid_argument("prompt variant must be 1..3");
    const auto k = static_cast<std::size_t>(variant - 1);
    switch (task) {
    case TaskKind::qa: return qa[k];
    case TaskKind::game24: return g24[k];
    case TaskKind::sudoku: return sdk[k];
    }
    throw std::invalid_argument("unknown task");
}

/// `a` and `b` are the task's comparison views of the two thoughts.
/// puzzle_size is used by Sudoku only.
inline std::string build_comparison_prompt(TaskKind task, std::string_view a, std::string_view b, int variant,
                                           int puzzle_size = 0) {
    std::map<std::string, std::string, std::less<>> v{{"input_1", std::string(a)}, {"input_2", std::string(b)}};
    if (task == TaskKind::sudoku) v["puzzle_size"] = std::to_string(puzzle_size);
    return fill_template(comparison_template(task, variant), v);
}

inline std::string qa_generation_prompt(std::string_view question) {
    return fill_template(templates::qa_generate, {{"question", std::string(question)}});
}

inline std::string g24_propose_prompt(std::string_view remaining) {
    return fill_template(templates::game24_propose, {{"input", std::string(remaining)}});
}

/// `input` is the puzzle, followed by the chain's steps in the few-shot layout.
inline std::string g24_answer_prompt(std::string_view input) {
    return fill_template(templates::game24_answer, {{"input", std::string(input)}});
}

inline std::string sudoku_generation_prompt(int puzzle_size, std::string_view question) {
    return fill_template(templates::sudoku_generate,
                         {{"puzzle_size", std::to_string(puzzle_size)}, {"question", std::string(question)}});
}

/// First standalone "1" or "2" token; nullopt when there is none.
inline std::optional<Winner> parse_comparison_reply(std::string_view text) {
    auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '1' && text[i] != '2') continue;
        const bool left_ok = i == 0 || !word(text[i - 1]);
        // a trailing '.' is fine ("1."), a decimal ("1.5") is not
        bool right_ok = i + 1 == text.size() || !word(text[i + 1]);
        if (!right_ok && text[i + 1] == '.')
            right_ok = i + 2 == text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 2]));
        if (left_ok && right_ok) return text[i] == '1' ? Winner::first : Winner::second;
    }
    return std::nullopt;
}

} // namespace ctot
