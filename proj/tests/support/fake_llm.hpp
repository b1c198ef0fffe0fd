#pragma once

// Deterministic stand-in for a chat model, used to record test cassettes.
// It recognises every prompt template, answers generation prompts with
// plausible task output and comparison prompts with a scripted preference.

#include <map>
#include <mutex>
#include <sstream>

#include "ctot/llm/gateway.hpp"
#include "ctot/random.hpp"
#include "ctot/tasks/adapter.hpp"
#include "ctot/tasks/prompts.hpp"

namespace ctot::fake {

/// Literal pieces of a template around its placeholders.
inline std::vector<std::string> literal_pieces(std::string_view tpl) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] == '{') {
            const auto close = tpl.find('}', i);
            if (close != std::string_view::npos) {
                out.push_back(cur);
                cur.clear();
                i = close;
                continue;
            }
        }
        cur += tpl[i];
    }
    out.push_back(cur);
    return out;
}

/// Placeholder values when `text` was built from `tpl`; nullopt otherwise.
inline std::optional<std::vector<std::string>> match(std::string_view tpl, std::string_view text) {
    const auto pieces = literal_pieces(tpl);
    if (text.substr(0, pieces[0].size()) != pieces[0]) return std::nullopt;
    std::size_t pos = pieces[0].size();
    std::vector<std::string> values;
    for (std::size_t k = 1; k < pieces.size(); ++k) {
        std::size_t at;
        if (k + 1 == pieces.size()) {
            if (text.size() < pieces[k].size() || text.substr(text.size() - pieces[k].size()) != pieces[k]) return std::nullopt;
            at = text.size() - pieces[k].size();
            if (at < pos) return std::nullopt;
        } else {
            at = pieces[k].empty() ? pos : text.find(pieces[k], pos);
            if (at == std::string_view::npos) return std::nullopt;
        }
        values.emplace_back(text.substr(pos, at - pos));
        pos = at + pieces[k].size();
    }
    return values;
}

inline std::uint64_t word_count(std::string_view s) {
    std::istringstream in{std::string(s)};
    std::string w;
    std::uint64_t n = 0;
    while (in >> w) ++n;
    return n;
}

struct Expr {
    Rational value;
    std::string text;
};

/// Builds "(a op b)" expressions by replaying steps over the inputs.
inline std::optional<std::string> expression_from_steps(const std::vector<Rational>& inputs,
                                                        const std::vector<Game24Step>& steps) {
    std::vector<Expr> pool;
    for (const auto& x : inputs) pool.push_back({x, to_string(x)});
    for (const auto& s : steps) {
        auto take = [&](const Rational& v) -> std::optional<Expr> {
            for (auto it = pool.begin(); it != pool.end(); ++it)
                if (it->value == v) {
                    auto e = *it;
                    pool.erase(it);
                    return e;
                }
            return std::nullopt;
        };
        auto a = take(s.lhs);
        auto b = take(s.rhs);
        if (!a || !b) return std::nullopt;
        pool.push_back({s.result, "(" + a->text + " " + s.op + " " + b->text + ")"});
    }
    if (pool.size() != 1) return std::nullopt;
    auto t = pool[0].text;
    if (t.size() > 2 && t.front() == '(' && t.back() == ')') t = t.substr(1, t.size() - 2);
    return t + " = 24";
}

struct ScriptOptions {
    char qa_correct = 'B';    // answer the scripted model leans towards
    int unparseable_every = 13; // roughly one comparison reply in this many is unusable
};

class ScriptedLlm final : public llm::Transport {
public:
    explicit ScriptedLlm(ScriptOptions opt = {}) : opt_(opt) {}

    llm::ChatResponse send(const llm::ChatRequest& req) override {
        const auto& prompt = req.messages.back().content;
        int occurrence;
        {
            std::lock_guard lock(mu_);
            occurrence = seen_[prompt]++;
        }
        const auto text = reply(prompt, occurrence);
        return {text, word_count(prompt), word_count(text)};
    }

private:
    std::string reply(const std::string& prompt, int occurrence) const {
        const auto h = derive_seed(tag(prompt), {static_cast<std::uint64_t>(occurrence)});
        for (auto kind : {TaskKind::qa, TaskKind::game24, TaskKind::sudoku})
            for (int v = 1; v <= 3; ++v)
                if (auto m = match(comparison_template(kind, v), prompt)) {
                    if (opt_.unparseable_every > 0 && h % static_cast<std::uint64_t>(opt_.unparseable_every) == 0)
                        return "Both look reasonable to me.";
                    const auto a = (*m)[0], b = (*m)[1];
                    return prefer_first(kind, a, b, h) ? "1" : "2";
                }
        if (auto m = match(templates::game24_answer, prompt)) return g24_answer((*m)[0]);
        if (auto m = match(templates::game24_propose, prompt)) return g24_propose((*m)[0], occurrence);
        if (auto m = match(templates::qa_generate, prompt)) return qa_step((*m)[0], h);
        if (auto m = match(templates::sudoku_generate, prompt)) return sudoku_step(m->back(), h, occurrence);
        return "I am not sure what to do.";
    }

    bool prefer_first(TaskKind kind, const std::string& a, const std::string& b, std::uint64_t h) const {
        auto score = [&](const std::string& s) -> int {
            if (kind == TaskKind::qa) {
                if (auto c = qa_parse(s)) return *c == opt_.qa_correct ? 3 : 1;
                return 2;
            }
            if (kind == TaskKind::game24) {
                auto xs = parse_numbers(s);
                if (xs.empty() || xs.size() > 4) return 0;
                return g24_solvable(xs) ? 2 : 1;
            }
            return static_cast<int>(std::count(s.begin(), s.end(), '*')) * -1;
        };
        const int sa = score(a), sb = score(b);
        if (sa != sb) return sa > sb;
        return (h >> 7) & 1;
    }

    std::string qa_step(const std::string& question, std::uint64_t h) const {
        const bool deeper = question.find("\nStep") != std::string::npos;
        const char letters[] = {'A', 'B', 'C', 'D', 'E'};
        if (!deeper && h % 3 != 0) return "Step 1: restate what is being asked and list the given quantities.";
        char pick = (h >> 3) % 4 == 0 ? letters[(h >> 5) % 5] : opt_.qa_correct;
        return "Step 1: work through the quantities given in the question.\nStep 2: compare with the options.\n###" +
               std::string(1, pick);
    }

    std::string g24_propose(const std::string& input, int occurrence) const {
        const auto xs = parse_numbers(input);
        std::vector<std::string> good, bad;
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = 0; j < xs.size(); ++j) {
                if (i == j) continue;
                for (char op : {'+', '-', '*', '/'}) {
                    if ((op == '+' || op == '*') && i > j) continue;
                    auto r = apply_op(xs[i], op, xs[j]);
                    if (!r || *r < Rational(0) || r->denominator() != 1) continue;
                    std::vector<Rational> left;
                    for (std::size_t k = 0; k < xs.size(); ++k)
                        if (k != i && k != j) left.push_back(xs[k]);
                    left.push_back(*r);
                    std::sort(left.begin(), left.end());
                    Game24Step s{xs[i], op, xs[j], *r, left};
                    (g24_solvable(left) ? good : bad).push_back(s.to_line());
                }
            }
        std::vector<std::string> lines;
        for (auto& g : good)
            if (lines.size() < 3 && std::find(lines.begin(), lines.end(), g) == lines.end()) lines.push_back(g);
        for (auto& b : bad)
            if (lines.size() < 6 && std::find(lines.begin(), lines.end(), b) == lines.end()) lines.push_back(b);
        if (xs.size() == 4 && occurrence == 0) lines.push_back("13 - 4 = 8 (left: 8 9 10)");
        std::string out = "Possible next steps:\n";
        for (auto& l : lines) out += l + "\n";
        return out;
    }

    std::string g24_answer(const std::string& input) const {
        // input: "<puzzle>\n    Steps:\n    <step>\n    <step>..."
        std::vector<std::string> lines;
        for (auto l : split_lines(input)) lines.emplace_back(trim(l));
        if (lines.empty()) return "Answer: unknown";
        const auto inputs = parse_numbers(lines[0]);
        std::vector<Game24Step> steps;
        for (std::size_t k = 1; k < lines.size(); ++k) {
            auto s = g24_parse_step(lines[k]);
            if (ok(s)) steps.push_back(std::get<Game24Step>(s));
        }
        auto e = expression_from_steps(inputs, steps);
        return "Answer: " + e.value_or("I could not find one");
    }

    static bool solve(SudokuGrid& g, std::size_t from = 0) {
        const auto n = static_cast<std::size_t>(g.size);
        for (std::size_t k = from; k < g.cells.size(); ++k) {
            if (g.cells[k]) continue;
            const auto r = k / n, c = k % n;
            for (int v = 1; v <= g.size; ++v) {
                bool clash = false;
                for (std::size_t t = 0; t < n && !clash; ++t)
                    clash = g.cells[r * n + t] == v || g.cells[t * n + c] == v;
                if (clash) continue;
                g.cells[k] = v;
                if (solve(g, k + 1)) return true;
            }
            g.cells[k] = 0;
            return false;
        }
        return true;
    }

    // Fills one or two blanks from a solution; the second reply to a given
    // prompt writes a clashing digit instead.
    std::string sudoku_step(const std::string& question, std::uint64_t h, int occurrence) const {
        auto parsed = parse_grid_literal(question);
        if (!ok(parsed)) return "###" + question;
        auto g = std::get<SudokuGrid>(parsed);
        std::vector<std::size_t> blanks;
        for (std::size_t k = 0; k < g.cells.size(); ++k)
            if (!g.cells[k]) blanks.push_back(k);
        if (blanks.empty()) return "###" + g.to_string();
        auto solved = g;
        const bool solvable = solve(solved);
        const std::size_t fill = blanks.size() <= 2 ? blanks.size() : 1 + h % 2;
        for (std::size_t f = 0; f < fill; ++f) {
            const auto k = blanks[(h >> 8) % blanks.size() + f < blanks.size() ? (h >> 8) % blanks.size() + f : f];
            g.cells[k] = solvable ? solved.cells[k] : 1;
        }
        if (occurrence == 1 && blanks.size() > 2) {
            const auto n = static_cast<std::size_t>(g.size);
            const auto k = blanks.back();
            const auto r = k / n;
            for (std::size_t t = 0; t < n; ++t)
                if (g.cells[r * n + t]) {
                    g.cells[k] = g.cells[r * n + t];
                    break;
                }
        }
        return "###" + g.to_string();
    }

    ScriptOptions opt_;
    mutable std::mutex mu_;
    std::map<std::string, int> seen_;
};

} // namespace ctot::fake
