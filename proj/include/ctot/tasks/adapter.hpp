#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctot/tasks/game24.hpp"
#include "ctot/tasks/prompts.hpp"
#include "ctot/tasks/qa.hpp"
#include "ctot/tasks/sudoku.hpp"
#include "ctot/thought.hpp"

namespace ctot {

/// How the remain list feeds the next candidate set.
///   keep_all    every remain thought re-enters each round
///   topup_2k    refill only while |new| <= 2K, up to 2K candidates
///   refill_to_k after post-selection pruning, refill the selected set up to K
enum class RefillPolicy { keep_all, topup_2k, refill_to_k };

inline const char* to_string(RefillPolicy p) {
    switch (p) {
    case RefillPolicy::keep_all: return "keep-all";
    case RefillPolicy::topup_2k: return "topup-2K";
    case RefillPolicy::refill_to_k: return "refill-to-K";
    }
    return "?";
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

/// Task hooks used by the orchestrator. `content` is always a thought's full
/// chain text: the parent's content, a newline, then the new step.
class TaskAdapter {
public:
    virtual ~TaskAdapter() = default;

    virtual std::string name() const = 0;
    virtual const std::string& query() const = 0;
    virtual std::optional<TaskKind> prompt_kind() const { return std::nullopt; }
    virtual RefillPolicy refill_policy() const = 0;
    virtual int puzzle_size() const { return 0; }

    virtual std::string generation_prompt(const Thought* parent) const = 0;
    /// Chat requests per parent when generating with fan-out m.
    virtual int generation_calls(int m) const { return m; }
    /// Step texts extracted from one generator reply.
    virtual std::vector<std::string> split_reply(std::string_view reply, const Thought* parent) const = 0;

    virtual std::optional<std::string> prune_before_selection(std::string_view) const { return std::nullopt; }
    virtual std::optional<std::string> prune_after_selection(std::string_view) const { return std::nullopt; }

    virtual bool is_answer(std::string_view content) const = 0;
    virtual bool terminate_on_answer() const = 0;
    virtual bool finalize_by_majority() const { return false; }
    virtual std::string comparison_view(std::string_view content) const { return std::string(content); }
    virtual std::optional<std::string> extract_answer(std::string_view content) const = 0;
    /// Correctness against the instance's reference, when the task has one.
    virtual std::optional<bool> score(const std::string& final_answer) const = 0;
};

/// Multiple-choice QA (answer letters A-E).
class QaTask final : public TaskAdapter {
public:
    QaTask(std::string question, std::optional<char> correct = std::nullopt)
        : question_(std::move(question)), correct_(correct) {}

    std::string name() const override { return "qa"; }
    const std::string& query() const override { return question_; }
    std::optional<TaskKind> prompt_kind() const override { return TaskKind::qa; }
    RefillPolicy refill_policy() const override { return RefillPolicy::keep_all; }

    std::string generation_prompt(const Thought* parent) const override {
        return qa_generation_prompt(parent ? question_ + "\n" + parent->content : question_);
    }
    std::vector<std::string> split_reply(std::string_view reply, const Thought*) const override {
        auto t = trim(reply);
        if (t.empty()) return {};
        return {std::string(t)};
    }
    bool is_answer(std::string_view content) const override { return qa_parse(content).has_value(); }
    bool terminate_on_answer() const override { return false; }
    bool finalize_by_majority() const override { return true; }
    std::optional<std::string> extract_answer(std::string_view content) const override {
        auto c = qa_parse(content);
        if (!c) return std::nullopt;
        return std::string(1, *c);
    }
    std::optional<bool> score(const std::string& final_answer) const override {
        if (!correct_) return std::nullopt;
        return final_answer.size() == 1 && final_answer[0] == *correct_;
    }

private:
    std::string question_;
    std::optional<char> correct_;
};

struct Game24Options {
    bool solvable_gate = false; // also prune chains whose remaining numbers cannot reach 24
};

/// Game of 24: steps "a op b = c (left: ...)", then one "Answer: expr" line
/// once a single 24 remains.
class Game24Task final : public TaskAdapter {
public:
    explicit Game24Task(std::vector<Rational> inputs, Game24Options opt = {})
        : inputs_(std::move(inputs)), query_(join_numbers(inputs_)), opt_(opt) {
        if (inputs_.empty() || inputs_.size() > 4) throw std::invalid_argument("Game of 24 takes 1 to 4 numbers");
    }

    std::string name() const override { return "game24"; }
    const std::string& query() const override { return query_; }
    std::optional<TaskKind> prompt_kind() const override { return TaskKind::game24; }
    RefillPolicy refill_policy() const override { return RefillPolicy::topup_2k; }
    const std::vector<Rational>& inputs() const { return inputs_; }

    std::string generation_prompt(const Thought* parent) const override {
        if (!parent) return g24_propose_prompt(query_);
        auto st = state(parent->content);
        if (!st) return g24_propose_prompt(query_);
        if (st->remaining.size() > 1) return g24_propose_prompt(join_numbers(st->remaining));
        std::string input = query_ + "\n    Steps:";
        for (const auto& s : st->steps) input += "\n    " + s.to_line();
        return g24_answer_prompt(input);
    }
    int generation_calls(int) const override { return 1; }

    std::vector<std::string> split_reply(std::string_view reply, const Thought* parent) const override {
        const bool answering = parent && remaining_is_single(parent->content);
        std::vector<std::string> out;
        for (auto raw : split_lines(reply)) {
            auto line = trim(raw);
            if (line.empty()) continue;
            const bool is_answer_line = line.substr(0, std::min<std::size_t>(7, line.size())) == "Answer:";
            if (answering) {
                if (is_answer_line) {
                    out.emplace_back(line);
                    break;
                }
                continue;
            }
            if (!is_answer_line && line.find('=') != std::string_view::npos) out.emplace_back(line);
        }
        return out;
    }

    std::optional<std::string> prune_before_selection(std::string_view content) const override {
        auto st = Game24State::replay(inputs_, content);
        if (auto e = error_of(st)) return e->message;
        const auto& s = std::get<Game24State>(st);
        if (s.answer_expr) {
            auto v = g24_validate_answer(*s.answer_expr, inputs_);
            if (!v.ok) return "answer rejected: " + v.reason;
            return std::nullopt;
        }
        if (s.remaining.size() == 1 && s.remaining[0] != kTarget) return "single number is not 24";
        if (opt_.solvable_gate && !g24_solvable(s.remaining)) return "remaining numbers cannot reach 24";
        return std::nullopt;
    }

    bool is_answer(std::string_view content) const override { return extract_answer(content).has_value(); }
    bool terminate_on_answer() const override { return true; }

    std::string comparison_view(std::string_view content) const override {
        auto st = state(content);
        return st ? join_numbers(st->remaining) : std::string(content);
    }
    std::optional<std::string> extract_answer(std::string_view content) const override {
        auto st = state(content);
        if (!st || !st->answer_expr) return std::nullopt;
        if (!g24_validate_answer(*st->answer_expr, inputs_).ok) return std::nullopt;
        return *st->answer_expr;
    }
    std::optional<bool> score(const std::string& final_answer) const override {
        return g24_validate_answer(final_answer, inputs_).ok;
    }

private:
    std::optional<Game24State> state(std::string_view content) const {
        auto st = Game24State::replay(inputs_, content);
        if (!ok(st)) return std::nullopt;
        return std::get<Game24State>(std::move(st));
    }
    bool remaining_is_single(std::string_view content) const {
        auto st = state(content);
        return st && !st->answer_expr && st->remaining.size() == 1;
    }

    std::vector<Rational> inputs_;
    std::string query_;
    Game24Options opt_;
};

/// Row/column Sudoku. Each step is a full grid line "###[[...]]".
class SudokuTask final : public TaskAdapter {
public:
    explicit SudokuTask(SudokuGrid puzzle) : puzzle_(std::move(puzzle)), query_(puzzle_.to_string()) {}

    std::string name() const override { return "sudoku"; }
    const std::string& query() const override { return query_; }
    std::optional<TaskKind> prompt_kind() const override { return TaskKind::sudoku; }
    RefillPolicy refill_policy() const override { return RefillPolicy::refill_to_k; }
    int puzzle_size() const override { return puzzle_.size; }
    const SudokuGrid& puzzle() const { return puzzle_; }

    std::string generation_prompt(const Thought* parent) const override {
        auto g = parent ? current(parent->content) : std::nullopt;
        return sudoku_generation_prompt(puzzle_.size, g ? g->to_string() : query_);
    }
    std::vector<std::string> split_reply(std::string_view reply, const Thought*) const override {
        auto t = trim(reply);
        if (t.empty()) return {};
        auto g = sudoku_parse(t, puzzle_.size);
        if (ok(g)) return {"###" + std::get<SudokuGrid>(g).to_string()};
        // Kept verbatim so the pruning stage records why it was rejected.
        std::string flat(t);
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        return {flat};
    }

    std::optional<std::string> prune_before_selection(std::string_view content) const override {
        auto g = sudoku_parse(last_line(content), puzzle_.size);
        if (auto e = error_of(g)) return e->message;
        return std::nullopt;
    }
    std::optional<std::string> prune_after_selection(std::string_view content) const override {
        auto g = current(content);
        if (!g) return "unparseable grid";
        auto c = sudoku_check(*g, puzzle_);
        if (!c.respects_givens) return "given number changed";
        if (!c.consistent) return "duplicate number in a row or column";
        return std::nullopt;
    }

    bool is_answer(std::string_view content) const override { return extract_answer(content).has_value(); }
    bool terminate_on_answer() const override { return true; }
    std::string comparison_view(std::string_view content) const override {
        auto g = current(content);
        return g ? g->to_string() : std::string(last_line(content));
    }
    std::optional<std::string> extract_answer(std::string_view content) const override {
        auto g = current(content);
        if (!g) return std::nullopt;
        auto c = sudoku_check(*g, puzzle_);
        if (!c.complete || !c.respects_givens) return std::nullopt;
        return g->to_string();
    }
    std::optional<bool> score(const std::string& final_answer) const override {
        auto g = parse_grid_literal(final_answer, puzzle_.size);
        if (!ok(g)) return false;
        auto c = sudoku_check(std::get<SudokuGrid>(g), puzzle_);
        return c.complete && c.respects_givens;
    }

private:
    static std::string_view last_line(std::string_view content) {
        auto lines = split_lines(trim(content));
        return lines.empty() ? std::string_view{} : trim(lines.back());
    }
    std::optional<SudokuGrid> current(std::string_view content) const {
        auto g = sudoku_parse(last_line(content), puzzle_.size);
        if (!ok(g)) return std::nullopt;
        return std::get<SudokuGrid>(std::move(g));
    }

    SudokuGrid puzzle_;
    std::string query_;
};

} // namespace ctot
