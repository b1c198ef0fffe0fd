#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

#include "ctot/tasks/parse.hpp"

namespace ctot {

/// Exact arithmetic for the 24 game; division produces fractions.
using Rational = boost::rational<long long>;

// Compare against Rational values only: mixed int/rational == recurses
// forever under C++20 rewritten comparisons in this boost version.
inline const Rational kTarget{24};

inline std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Accepts "12", "2.5" and "8/3".
inline std::optional<Rational> parse_rational(std::string_view tok) {
    static const std::regex pattern(R"(^(-?)(\d{1,12})(?:\.(\d{1,6}))?(?:/(\d{1,12}))?$)");
    std::cmatch m;
    tok = trim(tok);
    if (!std::regex_match(tok.begin(), tok.end(), m, pattern)) return std::nullopt;
    long long num = std::stoll(m[2].str());
    long long den = 1;
    if (m[3].matched) {
        for (char c : m[3].str()) {
            num = num * 10 + (c - '0');
            den *= 10;
        }
    }
    if (m[4].matched) {
        const long long d = std::stoll(m[4].str());
        if (d == 0) return std::nullopt;
        den *= d;
    }
    Rational r(num, den);
    return m[1].length() ? -r : r;
}

inline std::vector<Rational> parse_numbers(std::string_view text) {
    std::vector<Rational> out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok)
        if (auto r = parse_rational(tok)) out.push_back(*r);
    return out;
}

inline std::string join_numbers(std::span<const Rational> xs) {
    std::string s;
    for (const auto& x : xs) {
        if (!s.empty()) s += ' ';
        s += to_string(x);
    }
    return s;
}

inline std::optional<Rational> apply_op(const Rational& a, char op, const Rational& b) {
    switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    case '/':
        if (b == Rational(0)) return std::nullopt;
        return a / b;
    default: return std::nullopt;
    }
}

inline bool same_multiset(std::vector<Rational> a, std::vector<Rational> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

/// One proposed move: "a op b = result (left: x y z)".
struct Game24Step {
    Rational lhs;
    char op;
    Rational rhs;
    Rational result;
    std::vector<Rational> left;

    std::string to_line() const {
        return to_string(lhs) + " " + op + " " + to_string(rhs) + " = " + to_string(result) + " (left: " +
               join_numbers(left) + ")";
    }
};

inline Parsed<Game24Step> g24_parse_step(std::string_view line) {
    static const std::regex pattern(
        R"(^\s*([-\d./]+)\s*([-+*/])\s*([-\d./]+)\s*=\s*([-\d./]+)\s*\(\s*left\s*:\s*([^)]*)\)\s*$)");
    std::cmatch m;
    if (line.size() > 512 || !std::regex_match(line.begin(), line.end(), m, pattern))
        return ParseError{ParseError::Kind::malformed, "not a step line: " + std::string(line.substr(0, 80))};
    auto a = parse_rational(m[1].str()), b = parse_rational(m[3].str()), c = parse_rational(m[4].str());
    if (!a || !b || !c) return ParseError{ParseError::Kind::malformed, "bad number in step"};
    std::vector<Rational> left;
    std::istringstream in(m[5].str());
    std::string tok;
    while (in >> tok) {
        auto r = parse_rational(tok);
        if (!r) return ParseError{ParseError::Kind::malformed, "bad number in left list: " + tok};
        left.push_back(*r);
    }
    const char op = m[2].str()[0];
    auto value = apply_op(*a, op, *b);
    if (!value || *value != *c)
        return ParseError{ParseError::Kind::invalid_step, "arithmetic mismatch: " + std::string(trim(line))};
    return Game24Step{*a, op, *b, *c, std::move(left)};
}

namespace detail {

inline bool reaches_24(std::vector<Rational>& xs) {
    if (xs.size() == 1) return xs[0] == kTarget;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (i == j) continue;
            std::vector<Rational> rest;
            for (std::size_t k = 0; k < xs.size(); ++k)
                if (k != i && k != j) rest.push_back(xs[k]);
            for (char op : {'+', '-', '*', '/'}) {
                // + and * are symmetric; visit each unordered pair once for them.
                if ((op == '+' || op == '*') && j < i) continue;
                auto v = apply_op(xs[i], op, xs[j]);
                if (!v) continue;
                rest.push_back(*v);
                if (reaches_24(rest)) return true;
                rest.pop_back();
            }
        }
    return false;
}

} // namespace detail

/// Exhaustive search over pair choices, operators and orders.
inline bool g24_solvable(std::span<const Rational> numbers) {
    if (numbers.empty() || numbers.size() > 4) throw std::invalid_argument("g24_solvable takes 1 to 4 numbers");
    std::vector<Rational> xs(numbers.begin(), numbers.end());
    return detail::reaches_24(xs);
}

struct AnswerCheck {
    bool ok = false;
    std::string reason;
};

namespace detail {

// Recursive descent over + - * / and parentheses; collects literals.
class ExprParser {
public:
    explicit ExprParser(std::string_view s) : s_(s) {}

    std::optional<Rational> parse_all(std::vector<Rational>& literals, std::string& err) {
        literals_ = &literals;
        auto v = expr();
        skip_ws();
        if (!v) {
            err = err_.empty() ? "syntax error" : err_;
            return std::nullopt;
        }
        if (pos_ != s_.size()) {
            err = "trailing input at offset " + std::to_string(pos_);
            return std::nullopt;
        }
        return v;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    std::optional<Rational> expr() {
        auto v = term();
        while (v) {
            if (eat('+')) {
                auto r = term();
                if (!r) return std::nullopt;
                *v += *r;
            } else if (eat('-')) {
                auto r = term();
                if (!r) return std::nullopt;
                *v -= *r;
            } else {
                break;
            }
        }
        return v;
    }
    std::optional<Rational> term() {
        auto v = factor();
        while (v) {
            if (eat('*')) {
                auto r = factor();
                if (!r) return std::nullopt;
                *v *= *r;
            } else if (eat('/')) {
                auto r = factor();
                if (!r) return std::nullopt;
                if (*r == Rational(0)) {
                    err_ = "division by zero";
                    return std::nullopt;
                }
                *v /= *r;
            } else {
                break;
            }
        }
        return v;
    }
    std::optional<Rational> factor() {
        if (++depth_ > 64) {
            err_ = "nesting too deep";
            return std::nullopt;
        }
        struct Guard {
            int& d;
            ~Guard() { --d; }
        } guard{depth_};
        if (eat('(')) {
            auto v = expr();
            if (!v || !eat(')')) {
                if (err_.empty()) err_ = "unbalanced parenthesis";
                return std::nullopt;
            }
            return v;
        }
        skip_ws();
        const auto start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (start == pos_) {
            err_ = "expected a number at offset " + std::to_string(start);
            return std::nullopt;
        }
        auto r = parse_rational(s_.substr(start, pos_ - start));
        if (!r) {
            err_ = "bad number";
            return std::nullopt;
        }
        literals_->push_back(*r);
        return r;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    std::vector<Rational>* literals_ = nullptr;
    std::string err_;
};

} // namespace detail

/// Evaluates an arithmetic expression exactly; returns the value and literals.
inline std::optional<Rational> evaluate_expression(std::string_view expr, std::vector<Rational>& literals,
                                                   std::string* error = nullptr) {
    std::string err;
    auto v = detail::ExprParser(expr).parse_all(literals, err);
    if (!v && error) *error = err;
    return v;
}

/// True iff the expression uses exactly the input multiset and equals 24.
/// Accepts an optional "Answer:" prefix and an optional "= 24" suffix.
inline AnswerCheck g24_validate_answer(std::string_view text, std::span<const Rational> inputs) {
    auto s = trim(text);
    if (s.size() > 512) return {false, "expression too long"};
    if (s.size() >= 7) {
        std::string head(s.substr(0, 7));
        std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) { return std::tolower(c); });
        if (head == "answer:") s = trim(s.substr(7));
    }
    std::string_view lhs = s;
    if (auto eq = s.find('='); eq != std::string_view::npos) {
        lhs = s.substr(0, eq);
        auto rhs = parse_rational(trim(s.substr(eq + 1)));
        if (!rhs || *rhs != kTarget) return {false, "right-hand side is not 24"};
    }
    std::vector<Rational> literals;
    std::string err;
    auto value = evaluate_expression(lhs, literals, &err);
    if (!value) return {false, "unparseable expression: " + err};
    if (!same_multiset(literals, std::vector<Rational>(inputs.begin(), inputs.end())))
        return {false, "numbers used do not match the inputs"};
    if (*value != kTarget) return {false, "expression evaluates to " + to_string(*value)};
    return {true, {}};
}

/// Replays a thought's step lines from the puzzle inputs.
struct Game24State {
    std::vector<Rational> remaining;
    std::vector<Game24Step> steps;
    std::optional<std::string> answer_expr;

    /// Consumes two operands from `remaining` and inserts the result; the
    /// step's "left:" list has to agree with what remains.
    std::optional<ParseError> apply(const Game24Step& step) {
        auto next = remaining;
        for (const auto& operand : {step.lhs, step.rhs}) {
            auto it = std::find(next.begin(), next.end(), operand);
            if (it == next.end())
                return ParseError{ParseError::Kind::invalid_step, "operand " + to_string(operand) + " is not available"};
            next.erase(it);
        }
        next.push_back(step.result);
        if (!same_multiset(next, step.left))
            return ParseError{ParseError::Kind::invalid_step, "left list does not match remaining numbers"};
        std::sort(next.begin(), next.end());
        remaining = std::move(next);
        steps.push_back(step);
        return std::nullopt;
    }

    static Parsed<Game24State> replay(std::span<const Rational> inputs, std::string_view content) {
        Game24State st;
        st.remaining.assign(inputs.begin(), inputs.end());
        std::sort(st.remaining.begin(), st.remaining.end());
        std::size_t pos = 0;
        while (pos <= content.size()) {
            auto end = content.find('\n', pos);
            if (end == std::string_view::npos) end = content.size();
            auto line = trim(content.substr(pos, end - pos));
            pos = end + 1;
            if (line.empty()) continue;
            if (st.answer_expr) return ParseError{ParseError::Kind::malformed, "text after the answer line"};
            if (line.size() >= 7 && (line.substr(0, 7) == "Answer:" || line.substr(0, 7) == "answer:")) {
                st.answer_expr = std::string(trim(line.substr(7)));
                continue;
            }
            auto step = g24_parse_step(line);
            if (auto e = error_of(step)) return *e;
            if (auto e = st.apply(std::get<Game24Step>(step))) return *e;
        }
        return st;
    }
};

} // namespace ctot
