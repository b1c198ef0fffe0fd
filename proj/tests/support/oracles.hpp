#pragma once

// Independent checkers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <numeric>
#include <set>

#include "ctot/random.hpp"
#include "ctot/tasks/sudoku.hpp"

namespace ctot::oracles {

// Second solver: plain num/den pairs, no boost, enumerates permutations of the
// four numbers, all operator triples and the five binary tree shapes.
struct Frac {
    long long n, d; // d > 0, reduced
    bool valid = true;
};

inline Frac mk(long long n, long long d) {
    if (d == 0) return {0, 1, false};
    if (d < 0) n = -n, d = -d;
    const long long g = std::gcd(std::llabs(n), d);
    return {n / g, d / g};
}

inline Frac op(Frac a, char o, Frac b) {
    if (!a.valid || !b.valid) return {0, 1, false};
    switch (o) {
    case '+': return mk(a.n * b.d + b.n * a.d, a.d * b.d);
    case '-': return mk(a.n * b.d - b.n * a.d, a.d * b.d);
    case '*': return mk(a.n * b.n, a.d * b.d);
    default: return mk(a.n * b.d, a.d * b.n);
    }
}

inline bool is24(Frac f) { return f.valid && f.n == 24 && f.d == 1; }

inline bool brute_force(std::array<int, 4> v) {
    const char ops[4] = {'+', '-', '*', '/'};
    std::sort(v.begin(), v.end());
    do {
        Frac a = mk(v[0], 1), b = mk(v[1], 1), c = mk(v[2], 1), d = mk(v[3], 1);
        for (char x : ops)
            for (char y : ops)
                for (char z : ops) {
                    if (is24(op(op(op(a, x, b), y, c), z, d))) return true; // ((ab)c)d
                    if (is24(op(op(a, x, op(b, y, c)), z, d))) return true; // (a(bc))d
                    if (is24(op(op(a, x, b), y, op(c, z, d)))) return true; // (ab)(cd)
                    if (is24(op(a, x, op(op(b, y, c), z, d)))) return true; // a((bc)d)
                    if (is24(op(a, x, op(b, y, op(c, z, d))))) return true; // a(b(cd))
                }
    } while (std::next_permutation(v.begin(), v.end()));
    return false;
}

// Random Latin square: cyclic square with shuffled rows, columns and symbols.
inline SudokuGrid latin_square(Rng& rng, int n) {
    std::vector<int> rows(n), cols(n), sym(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::iota(sym.begin(), sym.end(), 1);
    rng.shuffle(std::span(rows));
    rng.shuffle(std::span(cols));
    rng.shuffle(std::span(sym));
    SudokuGrid g;
    g.size = n;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g.cells.push_back(sym[(rows[r] + cols[c]) % n]);
    g.givens.assign(g.cells.size(), true);
    return g;
}

// Direct restatement of the row/column rules, used as the check's oracle.
inline bool rows_and_cols_are_permutations(const SudokuGrid& g) {
    const int n = g.size;
    for (int i = 0; i < n; ++i) {
        std::set<int> r, c;
        for (int k = 0; k < n; ++k) {
            r.insert(g.at(i, k));
            c.insert(g.at(k, i));
        }
        if (r != std::set<int>(c) || static_cast<int>(r.size()) != n || *r.begin() != 1 || *r.rbegin() != n)
            return false;
    }
    return true;
}

} // namespace ctot::oracles
