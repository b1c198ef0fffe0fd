#pragma once

#include <atomic>
#include <concepts>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "ctot/preference.hpp"
#include "ctot/random.hpp"
#include "ctot/thought.hpp"

namespace ctot {

enum class Winner { first, second };

/// Identifies one oracle query. Simulated oracles derive their randomness
/// from these fields, so evaluation order never changes outcomes.
struct CompareContext {
    int layer = 0;            // tree round t (0 outside a tree run)
    int halving_round = 0;    // knockout round i, 1-based
    std::size_t pair_index = 0;
    int vote_index = 0;       // repetition within the pair
    int variant = 1;          // prompt template 1..3
    std::uint64_t stream = 0; // caller-chosen extra discriminator (trial index, ...)
};

/// Transport failure or similar; the caller decides between retry and abort.
struct OracleUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename O>
concept ComparisonOracle = requires(O& oracle, const Thought& a, const Thought& b, const CompareContext& ctx) {
    { oracle.compare(a, b, ctx) } -> std::same_as<Winner>;
};

/// Runtime-polymorphic oracle, for callers that choose the backend at run time.
class OracleBase {
public:
    virtual ~OracleBase() = default;
    virtual Winner compare(const Thought& a, const Thought& b, const CompareContext& ctx) = 0;
};

/// Bernoulli oracle: `a` wins with probability win_prob(a, b). Each query
/// draws from its own sub-seed of (seed, a, b, query identity).
class SimulatedOracle final : public OracleBase {
public:
    using WinProb = std::function<double(const Thought&, const Thought&)>;

    SimulatedOracle(WinProb win_prob, std::uint64_t seed) : win_prob_(std::move(win_prob)), seed_(seed) {}

    /// Items are addressed by thought id.
    SimulatedOracle(const PreferenceModel& model, std::uint64_t seed)
        : SimulatedOracle([&model](const Thought& a, const Thought& b) { return model.p(a.id, b.id); }, seed) {}

    Winner compare(const Thought& a, const Thought& b, const CompareContext& ctx) override {
        if (a.id == b.id) throw std::invalid_argument("oracle_compare: a thought cannot be compared with itself");
        queries_.fetch_add(1, std::memory_order_relaxed);
        const auto s = derive_seed(seed_, {a.id, b.id, static_cast<std::uint64_t>(ctx.layer),
                                           static_cast<std::uint64_t>(ctx.halving_round), ctx.pair_index,
                                           static_cast<std::uint64_t>(ctx.vote_index), ctx.stream});
        const double u = static_cast<double>(s >> 11) * 0x1.0p-53;
        return u < win_prob_(a, b) ? Winner::first : Winner::second;
    }

    std::uint64_t queries() const noexcept { return queries_.load(std::memory_order_relaxed); }

private:
    WinProb win_prob_;
    std::uint64_t seed_;
    std::atomic<std::uint64_t> queries_{0};
};

} // namespace ctot
