#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctot/tasks/parse.hpp"

namespace ctot {

/// Row/column Latin-square puzzle; 0 marks an unfilled ('*') cell.
struct SudokuGrid {
    int size = 0;
    std::vector<int> cells;
    std::vector<bool> givens; // cells fixed by the original puzzle

    int at(int r, int c) const { return cells[static_cast<std::size_t>(r * size + c)]; }
    int filled() const {
        int n = 0;
        for (int v : cells) n += v != 0;
        return n;
    }

    /// "[[1, *, *], [*, 1, *], [*, 2, *]]"
    std::string to_string() const {
        std::string s = "[";
        for (int r = 0; r < size; ++r) {
            s += r ? ", [" : "[";
            for (int c = 0; c < size; ++c) {
                if (c) s += ", ";
                s += at(r, c) ? std::to_string(at(r, c)) : "*";
            }
            s += "]";
        }
        return s + "]";
    }

    bool operator==(const SudokuGrid& o) const { return size == o.size && cells == o.cells; }
};

constexpr int kMaxSudokuSize = 9;

/// Parses a bare "[[...], ...]" literal. Rows may contain digits 1..N or '*'
/// (also '0', '.', '_' as unfilled). Filled cells are marked as givens.
inline Parsed<SudokuGrid> parse_grid_literal(std::string_view text, std::optional<int> expected_size = std::nullopt) {
    using K = ParseError::Kind;
    auto s = trim(text);
    if (s.size() < 2 || s.front() != '[') return ParseError{K::malformed, "grid must start with '['"};
    std::vector<std::vector<int>> rows;
    std::size_t i = 1;
    auto skip = [&] {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    };
    skip();
    while (i < s.size() && s[i] == '[') {
        ++i;
        std::vector<int> row;
        for (;;) {
            skip();
            if (i >= s.size()) return ParseError{K::malformed, "unterminated row"};
            const char ch = s[i];
            if (ch >= '0' && ch <= '9') {
                std::size_t j = i;
                while (j < s.size() && s[j] >= '0' && s[j] <= '9') ++j;
                if (j - i > 2) return ParseError{K::out_of_domain, "cell value too large"};
                row.push_back(std::stoi(std::string(s.substr(i, j - i))));
                i = j;
            } else if (ch == '*' || ch == '.' || ch == '_') {
                row.push_back(0);
                ++i;
            } else if (ch == '\'' || ch == '"') {
                // quoted cells such as '*' or "3"
                std::size_t j = s.find(ch, i + 1);
                if (j == std::string_view::npos) return ParseError{K::malformed, "unterminated quoted cell"};
                auto cell = trim(s.substr(i + 1, j - i - 1));
                if (cell == "*" || cell == "." || cell == "_" || cell.empty()) {
                    row.push_back(0);
                } else if (cell.size() <= 2 && cell.find_first_not_of("0123456789") == std::string_view::npos) {
                    row.push_back(std::stoi(std::string(cell)));
                } else {
                    return ParseError{K::malformed, "bad quoted cell"};
                }
                i = j + 1;
            } else {
                return ParseError{K::malformed, std::string("unexpected character '") + ch + "'"};
            }
            skip();
            if (i < s.size() && s[i] == ',') {
                ++i;
                continue;
            }
            if (i < s.size() && s[i] == ']') {
                ++i;
                break;
            }
            return ParseError{K::malformed, "expected ',' or ']' in row"};
        }
        rows.push_back(std::move(row));
        skip();
        if (i < s.size() && s[i] == ',') {
            ++i;
            skip();
        }
        if (rows.size() > kMaxSudokuSize) return ParseError{K::wrong_shape, "too many rows"};
    }
    skip();
    if (i >= s.size() || s[i] != ']') return ParseError{K::malformed, "grid must end with ']'"};

    const int n = static_cast<int>(rows.size());
    if (n == 0) return ParseError{K::wrong_shape, "empty grid"};
    for (const auto& row : rows)
        if (static_cast<int>(row.size()) != n) return ParseError{K::wrong_shape, "grid is not square"};
    if (expected_size && *expected_size != n)
        return ParseError{K::wrong_shape, "expected a " + std::to_string(*expected_size) + "x" +
                                              std::to_string(*expected_size) + " grid"};
    SudokuGrid g;
    g.size = n;
    for (const auto& row : rows)
        for (int v : row) {
            if (v < 0 || v > n) return ParseError{K::out_of_domain, "digit " + std::to_string(v) + " outside 1.." + std::to_string(n)};
            g.cells.push_back(v);
            g.givens.push_back(v != 0);
        }
    return g;
}

/// Extracts the grid after the last "###" marker of a model reply.
inline Parsed<SudokuGrid> sudoku_parse(std::string_view text, std::optional<int> expected_size = std::nullopt) {
    const auto mark = text.rfind("###");
    if (mark == std::string_view::npos) return ParseError{ParseError::Kind::malformed, "missing ### marker"};
    auto rest = text.substr(mark + 3);
    const auto open = rest.find('[');
    if (open == std::string_view::npos) return ParseError{ParseError::Kind::malformed, "no grid after ###"};
    // Match the outer bracket.
    int depth = 0;
    std::size_t close = std::string_view::npos;
    for (std::size_t k = open; k < rest.size(); ++k) {
        if (rest[k] == '[') ++depth;
        if (rest[k] == ']' && --depth == 0) {
            close = k;
            break;
        }
    }
    if (close == std::string_view::npos) return ParseError{ParseError::Kind::malformed, "unbalanced brackets"};
    return parse_grid_literal(rest.substr(open, close - open + 1), expected_size);
}

struct SudokuCheck {
    bool consistent = false;
    bool complete = false;
    bool respects_givens = false;
};

/// consistent: no repeated digit in any row or column among filled cells.
/// complete: no blanks and every row/column is a permutation of 1..N.
/// respects_givens: every cell fixed in `reference` still holds its value.
inline SudokuCheck sudoku_check(const SudokuGrid& grid, const SudokuGrid& reference) {
    SudokuCheck out;
    const int n = grid.size;
    out.consistent = true;
    bool no_blank = true;
    for (int line = 0; line < n; ++line) {
        std::vector<int> row_seen(n + 1, 0), col_seen(n + 1, 0);
        for (int k = 0; k < n; ++k) {
            const int rv = grid.at(line, k), cv = grid.at(k, line);
            if (rv == 0) no_blank = false;
            if (rv < 0 || rv > n || cv < 0 || cv > n) {
                out.consistent = false;
                continue;
            }
            if (rv && row_seen[rv]++) out.consistent = false;
            if (cv && col_seen[cv]++) out.consistent = false;
        }
    }
    out.complete = no_blank && out.consistent;
    out.respects_givens = reference.size == n;
    if (out.respects_givens)
        for (std::size_t k = 0; k < grid.cells.size(); ++k)
            if (reference.givens[k] && grid.cells[k] != reference.cells[k]) out.respects_givens = false;
    return out;
}

} // namespace ctot
