#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "ctot/oracle.hpp"
#include "ctot/random.hpp"
#include "ctot/thought.hpp"

namespace ctot {

enum class SelectionMode { standard, dueling };

inline std::string to_string(SelectionMode m) { return m == SelectionMode::standard ? "standard" : "dueling"; }

inline SelectionMode parse_selection_mode(const std::string& s) {
    if (s == "standard") return SelectionMode::standard;
    if (s == "dueling") return SelectionMode::dueling;
    throw std::invalid_argument("unknown selection mode: " + s);
}

/// Standard mode reads K, n and seed; dueling mode reads K, epsilon, delta,
/// gamma, budget_cap and seed.
struct SelectionParams {
    SelectionMode mode = SelectionMode::standard;
    std::size_t K = 1;
    int n = 1;
    double epsilon = 0.1;
    double delta = 0.05;
    double gamma = 1.0;
    std::optional<std::uint64_t> budget_cap;
    std::uint64_t seed = 0;

    void validate() const {
        if (K < 1) throw std::invalid_argument("K must be >= 1");
        if (mode == SelectionMode::standard) {
            if (n < 1) throw std::invalid_argument("n must be >= 1");
            return;
        }
        if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 1/2)");
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive");
        if (budget_cap && *budget_cap < 1) throw std::invalid_argument("budget_cap must be >= 1");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = to_string(mode);
        j["K"] = K;
        j["n"] = n;
        j["epsilon"] = epsilon;
        j["delta"] = delta;
        j["gamma"] = gamma;
        j["budget_cap"] = budget_cap ? nlohmann::ordered_json(*budget_cap) : nlohmann::ordered_json(nullptr);
        j["seed"] = seed;
        return j;
    }

    static SelectionParams from_json(const nlohmann::json& j) {
        SelectionParams p;
        if (j.contains("mode")) p.mode = parse_selection_mode(j.at("mode").get<std::string>());
        p.K = j.value("K", p.K);
        p.n = j.value("n", p.n);
        p.epsilon = j.value("epsilon", p.epsilon);
        p.delta = j.value("delta", p.delta);
        p.gamma = j.value("gamma", p.gamma);
        if (j.contains("budget_cap") && !j.at("budget_cap").is_null()) p.budget_cap = j.at("budget_cap").get<std::uint64_t>();
        p.seed = j.value("seed", p.seed);
        return p;
    }
};

/// Per-round bias, confidence and duel budget of the dueling knockout.
struct RoundSchedule {
    double epsilon;
    double delta;
    double raw_budget;    // ln(2/delta_i) / (2 eps_i^2), before rounding
    std::uint64_t budget; // ceil(raw_budget), then capped
};

/// eps_i = (2^(1/3) - 1) eps / (gamma 2^(i/3)),  delta_i = delta / 2^i,
/// budget_i = ceil(ln(2/delta_i) / (2 eps_i^2)), optionally capped.
inline RoundSchedule round_schedule(int i, double epsilon, double delta, double gamma,
                                    std::optional<std::uint64_t> budget_cap = std::nullopt) {
    if (i < 1) throw std::invalid_argument("round index must be >= 1");
    const double eps_i = (std::cbrt(2.0) - 1.0) * epsilon / (gamma * std::exp2(i / 3.0));
    const double delta_i = delta / std::exp2(i);
    const double raw = std::log(2.0 / delta_i) / (2.0 * eps_i * eps_i);
    constexpr auto max_budget = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t budget = !(raw < 1.8e19) ? max_budget : static_cast<std::uint64_t>(std::ceil(raw));
    if (budget_cap) budget = std::min(budget, *budget_cap);
    return {eps_i, delta_i, raw, std::max<std::uint64_t>(budget, 1)};
}

/// c = sqrt( ln(4 r^2 / delta_i) / (2 r) ).
inline double confidence_radius(std::uint64_t r, double delta_i) {
    if (r < 1) throw std::invalid_argument("confidence_radius needs r >= 1");
    const double rd = static_cast<double>(r);
    return std::sqrt(std::log(4.0 * rd * rd / delta_i) / (2.0 * rd));
}

struct DuelState {
    double p_hat = 0.5;
    double c_hat = 0.5;
    std::uint64_t r = 0;
    std::uint64_t wins_first = 0;
    std::uint64_t budget = 0;
};

struct DuelOutcome {
    Winner winner;
    std::uint64_t comparisons_used;
    DuelState state;
    bool tie_broken;
};

struct DuelInterrupted : std::runtime_error {
    DuelInterrupted(const std::string& what, DuelState s) : std::runtime_error(what), state(s) {}
    DuelState state;
};

/// Adaptive duel: query one vote at a time until |p_hat - 1/2| > c_hat - eps_i
/// or the budget is spent; the side with more wins takes it, ties go to a
/// coin drawn from `tie_seed`.
template <ComparisonOracle O>
DuelOutcome duel_pair(const Thought& a, const Thought& b, const RoundSchedule& sched, O& oracle,
                      CompareContext ctx, std::uint64_t tie_seed) {
    if (a.id == b.id) throw std::invalid_argument("duel_pair: a and b must differ");
    DuelState s;
    s.budget = sched.budget;
    while (s.r < s.budget) {
        ctx.vote_index = static_cast<int>(s.r);
        ctx.variant = static_cast<int>(s.r % 3) + 1;
        Winner v;
        try {
            v = oracle.compare(a, b, ctx);
        } catch (const OracleUnavailable& e) {
            throw DuelInterrupted(e.what(), s);
        }
        ++s.r;
        if (v == Winner::first) ++s.wins_first;
        s.p_hat = static_cast<double>(s.wins_first) / static_cast<double>(s.r);
        s.c_hat = confidence_radius(s.r, sched.delta);
        if (std::abs(s.p_hat - 0.5) > s.c_hat - sched.epsilon) break;
    }
    // p_hat == 1/2 exactly iff 2 * wins == r, checked in integers.
    if (2 * s.wins_first > s.r) return {Winner::first, s.r, s, false};
    if (2 * s.wins_first < s.r) return {Winner::second, s.r, s, false};
    Rng coin(tie_seed);
    return {coin.bernoulli(0.5) ? Winner::first : Winner::second, s.r, s, true};
}

/// Majority of a vote stream; nullopt on an exact tie.
inline std::optional<Winner> majority(std::span<const Winner> votes) {
    const auto first = std::count(votes.begin(), votes.end(), Winner::first);
    const auto second = static_cast<std::ptrdiff_t>(votes.size()) - first;
    if (first > second) return Winner::first;
    if (second > first) return Winner::second;
    return std::nullopt;
}

struct Match {
    ThoughtId first;
    ThoughtId second;
    ThoughtId winner;
    int halving_round;
    std::uint64_t comparisons;
};

struct SelectionResult {
    std::vector<ThoughtId> selected;
    std::vector<ThoughtId> eliminated;
    std::uint64_t comparisons_used = 0;
    std::vector<std::uint64_t> per_round_counts; // NC_i per halving round
    std::vector<Match> matches;

    int matches_played(ThoughtId id) const {
        return static_cast<int>(std::count_if(matches.begin(), matches.end(),
                                              [id](const Match& m) { return m.first == id || m.second == id; }));
    }
};

/// Oracle failure during selection; carries everything decided so far.
struct SelectionInterrupted : std::runtime_error {
    SelectionInterrupted(const std::string& what, SelectionResult p, std::optional<DuelState> d = std::nullopt)
        : std::runtime_error(what), partial(std::move(p)), duel(d) {}
    SelectionResult partial;
    std::optional<DuelState> duel;
};

namespace detail {

struct Resolution {
    Winner winner;
    std::uint64_t used;
};

// Halving driver shared by both modes. Each round shuffles the survivors and
// plays min(floor(|Z|/2), |Z| - K) disjoint pairs; unpaired items advance.
template <typename Resolve>
SelectionResult knockout(std::span<const Thought> Z, std::size_t K, std::uint64_t seed, Resolve&& resolve) {
    if (Z.empty()) throw std::invalid_argument("selection needs at least one candidate");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    {
        std::unordered_set<ThoughtId> ids;
        for (const auto& z : Z)
            if (!ids.insert(z.id).second) throw std::invalid_argument("duplicate thought id in candidate set");
    }

    std::vector<std::size_t> alive(Z.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    Rng pairing(derive_seed(seed, {tag("pairing")}));
    SelectionResult result;

    auto finish = [&](const std::vector<std::size_t>& survivors) {
        result.selected.clear();
        for (auto idx : survivors) result.selected.push_back(Z[idx].id);
    };

    for (int round = 1; alive.size() > K; ++round) {
        pairing.shuffle(std::span(alive));
        const std::size_t pairs = std::min(alive.size() / 2, alive.size() - K);
        std::vector<std::size_t> next;
        next.reserve(alive.size() - pairs);
        result.per_round_counts.push_back(0);
        for (std::size_t p = 0; p < pairs; ++p) {
            const auto ia = alive[2 * p], ib = alive[2 * p + 1];
            Resolution r;
            try {
                r = resolve(Z[ia], Z[ib], round, p);
            } catch (const DuelInterrupted& e) {
                result.comparisons_used += e.state.r;
                result.per_round_counts.back() += e.state.r;
                finish(alive);
                throw SelectionInterrupted(e.what(), std::move(result), e.state);
            } catch (const OracleUnavailable& e) {
                finish(alive);
                throw SelectionInterrupted(e.what(), std::move(result));
            }
            const bool a_wins = r.winner == Winner::first;
            const auto win = a_wins ? ia : ib, lose = a_wins ? ib : ia;
            result.matches.push_back({Z[ia].id, Z[ib].id, Z[win].id, round, r.used});
            result.eliminated.push_back(Z[lose].id);
            result.comparisons_used += r.used;
            result.per_round_counts.back() += r.used;
            next.push_back(win);
        }
        for (std::size_t k = 2 * pairs; k < alive.size(); ++k) next.push_back(alive[k]);
        alive = std::move(next);
    }
    finish(alive);
    return result;
}

} // namespace detail

/// Majority-vote knockout: each pair gets n independent votes (prompt
/// variants rotate 1,2,3,...); an even split is settled by a seeded coin.
template <ComparisonOracle O>
SelectionResult select_standard(std::span<const Thought> Z, const SelectionParams& params, O& oracle,
                                CompareContext base = {}) {
    params.validate();
    std::vector<Winner> votes;
    return detail::knockout(Z, params.K, params.seed,
                            [&](const Thought& a, const Thought& b, int round, std::size_t pair) {
                                CompareContext ctx = base;
                                ctx.halving_round = round;
                                ctx.pair_index = pair;
                                votes.clear();
                                for (int v = 0; v < params.n; ++v) {
                                    ctx.vote_index = v;
                                    ctx.variant = v % 3 + 1;
                                    votes.push_back(oracle.compare(a, b, ctx));
                                }
                                auto w = majority(votes);
                                if (!w) {
                                    Rng coin(derive_seed(params.seed, {tag("tie"), static_cast<std::uint64_t>(base.layer),
                                                                       static_cast<std::uint64_t>(round), pair}));
                                    w = coin.bernoulli(0.5) ? Winner::first : Winner::second;
                                }
                                return detail::Resolution{*w, static_cast<std::uint64_t>(params.n)};
                            });
}

/// Dueling knockout: round i resolves each pair with duel_pair under
/// round_schedule(i, ...). The round index restarts at 1 on every call.
template <ComparisonOracle O>
SelectionResult select_dueling(std::span<const Thought> Z, const SelectionParams& params, O& oracle,
                               CompareContext base = {}) {
    params.validate();
    std::vector<RoundSchedule> schedules;
    return detail::knockout(Z, params.K, params.seed,
                            [&](const Thought& a, const Thought& b, int round, std::size_t pair) {
                                while (static_cast<int>(schedules.size()) < round)
                                    schedules.push_back(round_schedule(static_cast<int>(schedules.size()) + 1, params.epsilon,
                                                                       params.delta, params.gamma, params.budget_cap));
                                CompareContext ctx = base;
                                ctx.halving_round = round;
                                ctx.pair_index = pair;
                                const auto tie_seed = derive_seed(
                                    params.seed, {tag("tie"), static_cast<std::uint64_t>(base.layer),
                                                  static_cast<std::uint64_t>(round), pair});
                                auto out = duel_pair(a, b, schedules[round - 1], oracle, ctx, tie_seed);
                                return detail::Resolution{out.winner, out.comparisons_used};
                            });
}

template <ComparisonOracle O>
SelectionResult select(std::span<const Thought> Z, const SelectionParams& params, O& oracle, CompareContext base = {}) {
    return params.mode == SelectionMode::standard ? select_standard(Z, params, oracle, base)
                                                  : select_dueling(Z, params, oracle, base);
}

} // namespace ctot
