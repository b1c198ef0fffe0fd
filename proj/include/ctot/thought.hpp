#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ctot {

using ThoughtId = std::uint64_t;

enum class ThoughtStatus { active, remain, answer, pruned, evicted };

constexpr std::string_view to_string(ThoughtStatus s) noexcept {
    switch (s) {
    case ThoughtStatus::active: return "active";
    case ThoughtStatus::remain: return "remain";
    case ThoughtStatus::answer: return "answer";
    case ThoughtStatus::pruned: return "pruned";
    case ThoughtStatus::evicted: return "evicted";
    }
    return "?";
}

/// Allowed moves: active->{active, remain, answer, pruned}, remain->{active, evicted}.
/// answer, pruned and evicted are terminal.
constexpr bool transition_allowed(ThoughtStatus from, ThoughtStatus to) noexcept {
    using S = ThoughtStatus;
    switch (from) {
    case S::active: return to == S::active || to == S::remain || to == S::answer || to == S::pruned;
    case S::remain: return to == S::active || to == S::evicted;
    default: return false;
    }
}

/// One node of the thought tree. Content carries the whole chain up to and
/// including this step, so any node can be shown to the comparator alone.
struct Thought {
    ThoughtId id = 0;
    std::string content;
    std::optional<ThoughtId> parent;
    int depth = 1; // root layer = 1
    ThoughtStatus status = ThoughtStatus::active;
    int compare_count = 0;
    int born_round = 0;

    void move_to(ThoughtStatus next) {
        if (!transition_allowed(status, next))
            throw std::logic_error("illegal thought status transition " + std::string(to_string(status)) + " -> " +
                                   std::string(to_string(next)));
        status = next;
    }
};

} // namespace ctot
