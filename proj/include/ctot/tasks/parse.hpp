#pragma once

#include <string>
#include <string_view>
#include <variant>

namespace ctot {

struct ParseError {
    enum class Kind { malformed, invalid_step, out_of_domain, wrong_shape };
    Kind kind = Kind::malformed;
    std::string message;
};

/// Either a parsed value or a typed error. Parsers never throw on bad text.
template <typename T>
using Parsed = std::variant<T, ParseError>;

template <typename T>
bool ok(const Parsed<T>& p) noexcept {
    return std::holds_alternative<T>(p);
}

template <typename T>
const ParseError* error_of(const Parsed<T>& p) noexcept {
    return std::get_if<ParseError>(&p);
}

inline std::string_view trim(std::string_view s) noexcept {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace ctot
