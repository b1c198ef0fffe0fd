#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ctot/oracle.hpp"
#include "ctot/preference.hpp"
#include "ctot/random.hpp"

using namespace ctot;

namespace {

Thought item(ThoughtId id) {
    Thought t;
    t.id = id;
    return t;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

} // namespace

TEST(OracleCompare, DeterministicPreferences) {
    auto sure = PreferenceModel::from_matrix({{0.5, 1.0}, {0.0, 0.5}});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SimulatedOracle oracle(sure, seed);
        EXPECT_EQ(oracle.compare(item(0), item(1), {}), Winner::first);
        EXPECT_EQ(oracle.compare(item(1), item(0), {}), Winner::second);
    }
}

TEST(OracleCompare, EmpiricalRateMatchesBernoulliParameter) {
    auto m = PreferenceModel::from_matrix({{0.5, 0.7}, {0.3, 0.5}});
    SimulatedOracle oracle(m, 1234);
    int first = 0;
    CompareContext ctx;
    for (int v = 0; v < 10000; ++v) {
        ctx.vote_index = v;
        first += oracle.compare(item(0), item(1), ctx) == Winner::first;
    }
    EXPECT_NEAR(first / 10000.0, 0.7, 0.02);
    EXPECT_EQ(oracle.queries(), 10000u);
}

TEST(OracleCompare, RejectsSelfComparison) {
    auto m = build_btl_model({1, 2});
    SimulatedOracle oracle(m, 0);
    EXPECT_THROW(oracle.compare(item(1), item(1), {}), std::invalid_argument);
}

TEST(OracleCompare, VoteStreamIsPureFunctionOfSeedAndQuery) {
    auto m = build_linear_model({0, 1, 2, 3}, 0.1);
    SimulatedOracle a(m, 99), b(m, 99);
    // Same queries, opposite evaluation order.
    std::vector<Winner> fwd, rev(64);
    for (int v = 0; v < 64; ++v) fwd.push_back(a.compare(item(v % 4), item((v + 1) % 4), {.vote_index = v}));
    for (int v = 63; v >= 0; --v) rev[v] = b.compare(item(v % 4), item((v + 1) % 4), {.vote_index = v});
    EXPECT_EQ(fwd, rev);
}

TEST(LinearModel, ClampFormula) {
    auto m = build_linear_model({1, 0}, 0.2);
    EXPECT_DOUBLE_EQ(m.p(0, 1), 0.7);
    EXPECT_DOUBLE_EQ(m.p(1, 0), 0.3);
    EXPECT_EQ(m.gamma(), 1.0);

    auto eq = build_linear_model({3.5, 3.5}, 0.9);
    EXPECT_EQ(eq.p(0, 1), 0.5);

    auto sat = build_linear_model({5, 0}, 0.2);
    EXPECT_EQ(sat.p(0, 1), 1.0);
    EXPECT_EQ(sat.p(1, 0), 0.0);
}

TEST(LinearModel, RejectsNonFinite) {
    EXPECT_THROW(build_linear_model({0, std::numeric_limits<double>::infinity()}, 0.1), std::invalid_argument);
    EXPECT_THROW(build_linear_model({0, std::nan("")}, 0.1), std::invalid_argument);
    EXPECT_THROW(build_linear_model({0, 1}, 0.0), std::invalid_argument);
}

TEST(BtlModel, RatioFormula) {
    EXPECT_DOUBLE_EQ(build_btl_model({3, 1}).p(0, 1), 0.75);
    EXPECT_EQ(build_btl_model({1, 1}).p(0, 1), 0.5);
    auto m = build_btl_model({9, 1, 1});
    EXPECT_DOUBLE_EQ(m.p(0, 1), 0.9);
    EXPECT_DOUBLE_EQ(m.p(0, 2), 0.9);
    EXPECT_EQ(m.p(1, 2), 0.5);
}

TEST(BtlModel, RejectsNonPositiveWeight) {
    EXPECT_THROW(build_btl_model({1, 0}), std::invalid_argument);
    EXPECT_THROW(build_btl_model({1, -2}), std::invalid_argument);
}

TEST(PreferenceModel, AntisymmetryAndRankingConsistency) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 2 + rng.below(20);
        std::vector<PreferenceModel> models{build_linear_model(random_vector(rng, n, -5, 5), 0.01 + rng.uniform()),
                                            build_btl_model(random_vector(rng, n, 0.01, 10))};
        for (const auto& m : models) {
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_EQ(m.p(i, i), 0.5);
                for (std::size_t j = 0; j < n; ++j) {
                    EXPECT_EQ(m.p(i, j) + m.p(j, i), 1.0);
                    if (m.utilities()[i] > m.utilities()[j]) {
                        EXPECT_GE(m.p(i, j), 0.5);
                    }
                }
            }
        }
    }
}

TEST(PreferenceModel, MatrixRejectsBadEntries) {
    EXPECT_THROW(PreferenceModel::from_matrix({{0.5, 1.2}, {-0.2, 0.5}}), std::invalid_argument);
    EXPECT_THROW(PreferenceModel::from_matrix({{0.5, 0.5}}), std::invalid_argument);
}

TEST(PreferenceModel, JsonRoundTripPreservesMatrix) {
    std::vector<PreferenceModel> models{build_linear_model({0, 1, 2.5}, 0.1), build_btl_model({4, 2, 1}),
                                        PreferenceModel::from_matrix({{0.5, 0.6, 0.9}, {0.4, 0.5, 0.7}, {0.1, 0.3, 0.5}}, 2.0)};
    for (const auto& m : models) {
        const auto j = m.to_json();
        auto back = PreferenceModel::from_json(nlohmann::json::parse(j.dump()));
        EXPECT_EQ(back.kind(), m.kind());
        EXPECT_EQ(back.gamma(), m.gamma());
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t k = 0; k < m.size(); ++k) EXPECT_DOUBLE_EQ(back.p(i, k), m.p(i, k));
    }
    EXPECT_EQ(models[0].to_json()["kind"], "linear");
    EXPECT_EQ(models[1].to_json()["weights"].size(), 3u);
    EXPECT_EQ(models[2].to_json()["p"][0][2], 0.9);
}

TEST(CheckTransitivity, UnclampedLinearModelsSatisfyTriangle) {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 3 + rng.below(15);
        auto u = random_vector(rng, n, 0, 1);
        // slope small enough that 1/2 + slope * max_gap < 1
        auto m = build_linear_model(u, 0.45 * rng.uniform() + 0.01);
        auto report = check_transitivity(m);
        EXPECT_TRUE(report.triangle_ok) << "trial " << trial;
    }
}

TEST(CheckTransitivity, BtlModelsSatisfyTriangle) {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = build_btl_model(random_vector(rng, 3 + rng.below(15), 0.05, 20));
        EXPECT_TRUE(check_transitivity(m).triangle_ok) << "trial " << trial;
    }
}

TEST(CheckTransitivity, BtlSingleTriple) {
    // adv(0,1) = 1/6, adv(1,2) = 1/6, adv(0,2) = 3/10 <= 1/3
    auto report = check_transitivity(build_btl_model({4, 2, 1}));
    EXPECT_TRUE(report.triangle_ok);
    EXPECT_TRUE(report.witnesses.empty());
}

TEST(CheckTransitivity, FlagsRelaxedSstViolationWithWitness) {
    auto m = PreferenceModel::from_matrix({{0.5, 0.7, 0.55}, {0.3, 0.5, 0.7}, {0.45, 0.3, 0.5}}, 1.0);
    // Borda ranking: item 0 (1.75) > item 1 (1.5) > item 2 (1.25).
    auto report = check_transitivity(m);
    EXPECT_FALSE(report.sst_gamma_ok);
    EXPECT_TRUE(report.triangle_ok);
    ASSERT_EQ(report.witnesses.size(), 1u);
    EXPECT_EQ(report.witnesses[0].i, 0u);
    EXPECT_EQ(report.witnesses[0].j, 1u);
    EXPECT_EQ(report.witnesses[0].k, 2u);
    EXPECT_TRUE(report.witnesses[0].sst_violated);

    // A large enough gamma relaxes the requirement: 0.05 >= 0.2 / 4.
    auto relaxed = PreferenceModel::from_matrix({{0.5, 0.7, 0.55}, {0.3, 0.5, 0.7}, {0.45, 0.3, 0.5}}, 4.0);
    EXPECT_TRUE(check_transitivity(relaxed).sst_gamma_ok);
}

TEST(CheckTransitivity, SaturatedLinearModelStillSubadditive) {
    // Clamped advantage is min(1/2, slope*gap): monotone and concave in the
    // gap, so both conditions survive saturation.
    auto m = build_linear_model({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}, 0.05);
    auto report = check_transitivity(m);
    EXPECT_TRUE(report.triangle_ok);
    EXPECT_TRUE(report.sst_gamma_ok);
}
