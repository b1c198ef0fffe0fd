#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ctot/oracle.hpp"
#include "ctot/preference.hpp"
#include "ctot/selection.hpp"

using namespace ctot;

namespace {

std::vector<Thought> items(std::size_t n) {
    std::vector<Thought> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i].id = i;
    return z;
}

std::vector<double> unit_gaps(std::size_t n) {
    std::vector<double> u(n);
    std::iota(u.begin(), u.end(), 0.0);
    return u;
}

// Perfect oracle on a random permutation of utilities.
PreferenceModel noiseless(Rng& rng, std::size_t n) {
    auto u = unit_gaps(n);
    rng.shuffle(std::span(u));
    return build_linear_model(u, 1.0);
}

struct FailingOracle {
    int budget;
    int calls = 0;
    Winner compare(const Thought&, const Thought&, const CompareContext&) {
        if (++calls > budget) throw OracleUnavailable("transport down");
        return Winner::first;
    }
};

} // namespace

TEST(RoundSchedule, FirstRoundValues) {
    auto s = round_schedule(1, 0.1, 0.05, 1.0);
    EXPECT_NEAR(s.epsilon, 0.0206299474015900, 1e-12);
    EXPECT_DOUBLE_EQ(s.delta, 0.025);
    EXPECT_EQ(s.budget, 5149u);
}

TEST(RoundSchedule, LaterRoundsShrinkBiasAndConfidence) {
    auto s1 = round_schedule(1, 0.3, 0.1, 1.0);
    auto s2 = round_schedule(2, 0.3, 0.1, 1.0);
    EXPECT_NEAR(s1.epsilon / s2.epsilon, std::cbrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(s2.delta, 0.025);
    EXPECT_EQ(s1.budget, 482u);
    EXPECT_GT(s2.budget, s1.budget);
    EXPECT_THROW(round_schedule(0, 0.3, 0.1, 1.0), std::invalid_argument);
}

TEST(RoundSchedule, DoublingGammaQuadruplesBudget) {
    for (int i = 1; i <= 6; ++i) {
        auto a = round_schedule(i, 0.2, 0.1, 1.0);
        auto b = round_schedule(i, 0.2, 0.1, 2.0);
        EXPECT_NEAR(b.raw_budget / a.raw_budget, 4.0, 1e-12);
        EXPECT_LE(std::llabs(static_cast<long long>(b.budget) - 4 * static_cast<long long>(a.budget)), 3);
    }
}

TEST(RoundSchedule, HugeGammaNeedsCap) {
    auto uncapped = round_schedule(3, 0.1, 0.05, 1e9);
    EXPECT_GT(uncapped.budget, 1'000'000'000'000u);
    auto capped = round_schedule(3, 0.1, 0.05, 1e9, 3);
    EXPECT_EQ(capped.budget, 3u);
}

TEST(ConfidenceRadius, ClosedForm) {
    EXPECT_NEAR(confidence_radius(2, 0.5), 0.930824352764759, 1e-12);
    EXPECT_NEAR(confidence_radius(1, 0.5), 1.019666990168809, 1e-12);
    EXPECT_THROW(confidence_radius(0, 0.5), std::invalid_argument);
}

TEST(ConfidenceRadius, VanishesAsRGrows) {
    double prev = confidence_radius(1, 0.01);
    for (std::uint64_t r = 2; r < (1ull << 40); r *= 2) {
        const double c = confidence_radius(r, 0.01);
        if (r > 4) {
            EXPECT_LT(c, prev);
        }
        prev = c;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(DuelPair, DeterministicPreferenceAlwaysWins) {
    auto m = PreferenceModel::from_matrix({{0.5, 1.0}, {0.0, 0.5}});
    auto z = items(2);
    for (double eps : {0.01, 0.1, 0.3})
        for (std::uint64_t budget : {1u, 3u, 100u}) {
            SimulatedOracle oracle(m, 5);
            RoundSchedule s{eps, 0.05, 0, budget};
            auto out = duel_pair(z[0], z[1], s, oracle, {}, 0);
            EXPECT_EQ(out.winner, Winner::first);
            EXPECT_LE(out.comparisons_used, budget);
            EXPECT_EQ(out.state.p_hat, 1.0);
        }
}

TEST(DuelPair, EvenSplitAtBudgetUsesTieStream) {
    auto m = PreferenceModel::from_matrix({{0.5, 0.5}, {0.5, 0.5}});
    auto z = items(2);
    RoundSchedule s{0.01, 0.05, 0, 4};
    int ties = 0;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        SimulatedOracle oracle(m, seed);
        auto out = duel_pair(z[0], z[1], s, oracle, {}, 1000 + seed);
        EXPECT_EQ(out.comparisons_used, 4u);
        if (out.state.wins_first != 2) continue;
        ++ties;
        EXPECT_TRUE(out.tie_broken);
        Rng coin(1000 + seed);
        EXPECT_EQ(out.winner, coin.bernoulli(0.5) ? Winner::first : Winner::second);
    }
    EXPECT_GT(ties, 10);
}

TEST(DuelPair, StrongPreferenceStopsEarly) {
    // Anchor from an independent 100k-duel Monte-Carlo of the same stopping
    // rule: mean comparisons 27.13, sd 8.2.
    auto m = PreferenceModel::from_matrix({{0.5, 0.9}, {0.1, 0.5}});
    auto z = items(2);
    RoundSchedule s{0.05, 0.05, 0, 10000};
    SimulatedOracle oracle(m, 2024);
    double total = 0;
    int a_wins = 0;
    for (int d = 0; d < 1000; ++d) {
        auto out = duel_pair(z[0], z[1], s, oracle, {.stream = static_cast<std::uint64_t>(d)}, d);
        total += static_cast<double>(out.comparisons_used);
        a_wins += out.winner == Winner::first;
    }
    const double mean = total / 1000;
    EXPECT_LT(mean, 10000);
    EXPECT_NEAR(mean, 27.13, 1.3);
    EXPECT_GE(a_wins, 950);
}

TEST(DuelPair, OracleFailureCarriesPartialState) {
    FailingOracle oracle{5};
    auto z = items(2);
    RoundSchedule s{0.001, 0.05, 0, 100};
    try {
        duel_pair(z[0], z[1], s, oracle, {}, 0);
        FAIL() << "expected DuelInterrupted";
    } catch (const DuelInterrupted& e) {
        EXPECT_EQ(e.state.r, 5u);
        EXPECT_EQ(e.state.wins_first, 5u);
    }
}

TEST(SelectStandard, PerfectOracleFindsMaximum) {
    Rng rng(1);
    auto m = noiseless(rng, 8);
    auto z = items(8);
    SimulatedOracle oracle(m, 1);
    SelectionParams p{.mode = SelectionMode::standard, .K = 1, .n = 1};
    auto r = select_standard(z, p, oracle);
    ASSERT_EQ(r.selected.size(), 1u);
    EXPECT_EQ(r.selected[0], m.best());
    EXPECT_EQ(r.comparisons_used, 7u);
}

TEST(SelectStandard, AlreadyAtOrBelowK) {
    auto z = items(1);
    auto m = build_btl_model({1});
    SimulatedOracle oracle(m, 0);
    SelectionParams p{.K = 3};
    auto r = select_standard(z, p, oracle);
    EXPECT_EQ(r.selected, std::vector<ThoughtId>{0});
    EXPECT_EQ(r.comparisons_used, 0u);
    EXPECT_TRUE(r.per_round_counts.empty());
}

TEST(SelectStandard, ComparisonCountIsMatchesTimesVotes) {
    auto z = items(32);
    auto m = build_linear_model(unit_gaps(32), 0.02);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SimulatedOracle oracle(m, seed);
        SelectionParams p{.K = 4, .n = 3, .seed = seed};
        auto r = select_standard(z, p, oracle);
        EXPECT_EQ(r.comparisons_used, 84u);
        EXPECT_EQ(r.matches.size(), 28u);
        EXPECT_EQ(r.per_round_counts, (std::vector<std::uint64_t>{48, 24, 12}));
        EXPECT_EQ(oracle.queries(), 84u);
    }
}

TEST(SelectStandard, RejectsEmptyCandidateSet) {
    std::vector<Thought> none;
    auto m = build_btl_model({1});
    SimulatedOracle oracle(m, 0);
    EXPECT_THROW(select_standard(none, SelectionParams{}, oracle), std::invalid_argument);
}

TEST(SelectStandard, OracleFailurePropagatesWithPartialResult) {
    auto z = items(8);
    FailingOracle oracle{5}; // n=2 -> dies during the third match
    SelectionParams p{.K = 1, .n = 2};
    try {
        select_standard(z, p, oracle);
        FAIL() << "expected SelectionInterrupted";
    } catch (const SelectionInterrupted& e) {
        EXPECT_EQ(e.partial.matches.size(), 2u);
        EXPECT_EQ(e.partial.comparisons_used, 4u);
        EXPECT_EQ(e.partial.eliminated.size(), 2u);
    }
}

TEST(SelectStandard, OddVoteCountNeverTies) {
    for (int n : {1, 3, 5}) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            std::vector<Winner> votes;
            for (int b = 0; b < n; ++b) votes.push_back((mask >> b) & 1u ? Winner::first : Winner::second);
            EXPECT_TRUE(majority(votes).has_value()) << "n=" << n << " mask=" << mask;
        }
    }
    std::vector<Winner> even{Winner::first, Winner::second};
    EXPECT_FALSE(majority(even).has_value());
}

TEST(SelectDueling, TwoItemsPerfectOracle) {
    // With eps=0.1, delta=0.05 the round-1 duel stops once c_hat < 1/2 + eps_1,
    // first reached at r = 21.
    auto m = PreferenceModel::from_matrix({{0.5, 0.0}, {1.0, 0.5}});
    auto z = items(2);
    SimulatedOracle oracle(m, 0);
    SelectionParams p{.mode = SelectionMode::dueling, .K = 1, .epsilon = 0.1, .delta = 0.05, .gamma = 1.0};
    auto r = select_dueling(z, p, oracle);
    EXPECT_EQ(r.selected, std::vector<ThoughtId>{1});
    EXPECT_EQ(r.comparisons_used, 21u);
}

TEST(SelectDueling, PacSuccessOnLinearModel) {
    auto m = build_linear_model(unit_gaps(16), 0.05);
    auto z = items(16);
    SimulatedOracle oracle(m, 77);
    int ok = 0;
    for (std::uint64_t t = 0; t < 500; ++t) {
        SelectionParams p{.mode = SelectionMode::dueling, .K = 1, .epsilon = 0.3, .delta = 0.1, .gamma = 1.0, .seed = t};
        auto r = select_dueling(z, p, oracle, {.stream = t});
        ok += m.is_epsilon_maximum(r.selected.at(0), 0.3);
    }
    EXPECT_GE(ok, 425);
}

TEST(SelectDueling, NothingToDoAtK) {
    auto z = items(5);
    auto m = build_linear_model(unit_gaps(5), 0.1);
    SimulatedOracle oracle(m, 0);
    SelectionParams p{.mode = SelectionMode::dueling, .K = 5};
    auto r = select_dueling(z, p, oracle);
    EXPECT_EQ(r.selected.size(), 5u);
    EXPECT_EQ(r.comparisons_used, 0u);
}

TEST(SelectDueling, BudgetCapBoundsEveryDuel) {
    auto z = items(32);
    auto m = build_linear_model(unit_gaps(32), 0.001);
    SimulatedOracle oracle(m, 3);
    SelectionParams p{.mode = SelectionMode::dueling, .K = 2, .epsilon = 0.1, .delta = 0.1, .gamma = 0.1, .budget_cap = 3};
    auto r = select_dueling(z, p, oracle);
    for (const auto& match : r.matches) EXPECT_LE(match.comparisons, 3u);
    EXPECT_LE(r.comparisons_used, 3u * 30u);
}

TEST(Selection, EliminationAccountingAndPartition) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(40);
        const auto K = 1 + rng.below(6);
        auto z = items(n);
        auto m = build_linear_model(unit_gaps(n), 0.03);
        SimulatedOracle oracle(m, trial);
        for (auto mode : {SelectionMode::standard, SelectionMode::dueling}) {
            SelectionParams p{.mode = mode, .K = K, .n = 1 + 2 * static_cast<int>(rng.below(2)), .epsilon = 0.3,
                              .delta = 0.2, .budget_cap = 50, .seed = rng.next()};
            auto r = select(z, p, oracle);
            const auto expected_kept = std::min<std::size_t>(n, K);
            EXPECT_EQ(r.selected.size(), expected_kept);
            EXPECT_EQ(r.matches.size(), n - expected_kept);
            std::set<ThoughtId> all(r.selected.begin(), r.selected.end());
            for (auto e : r.eliminated) EXPECT_TRUE(all.insert(e).second);
            EXPECT_EQ(all.size(), n);
            EXPECT_EQ(std::accumulate(r.per_round_counts.begin(), r.per_round_counts.end(), std::uint64_t{0}),
                      r.comparisons_used);
        }
    }
}

TEST(Selection, NoiselessMaximumAlwaysSurvives) {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 2 + rng.below(40);
        auto m = noiseless(rng, n);
        auto z = items(n);
        SimulatedOracle oracle(m, trial);
        for (auto mode : {SelectionMode::standard, SelectionMode::dueling}) {
            SelectionParams p{.mode = mode, .K = 1 + rng.below(4), .epsilon = 0.2, .delta = 0.1, .seed = rng.next()};
            auto r = select(z, p, oracle);
            EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), m.best()), r.selected.end());
        }
    }
}

TEST(Selection, SameSeedSameResult) {
    auto m = build_linear_model(unit_gaps(24), 0.02);
    auto z = items(24);
    for (auto mode : {SelectionMode::standard, SelectionMode::dueling}) {
        SelectionParams p{.mode = mode, .K = 3, .n = 3, .epsilon = 0.25, .delta = 0.1, .seed = 42};
        SimulatedOracle o1(m, 9), o2(m, 9);
        auto a = select(z, p, o1);
        auto b = select(z, p, o2);
        EXPECT_EQ(a.selected, b.selected);
        EXPECT_EQ(a.eliminated, b.eliminated);
        EXPECT_EQ(a.per_round_counts, b.per_round_counts);
    }
}
