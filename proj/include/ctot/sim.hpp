#pragma once

#include <algorithm>
#include <cstdio>
#include <string>

#include "ctot/generator.hpp"
#include "ctot/oracle.hpp"
#include "ctot/random.hpp"
#include "ctot/tasks/adapter.hpp"

namespace ctot {

/// Task with hidden utilities for simulated tree runs. A step reads
/// "<label> u=<utility>", optionally followed by " ANSWER" when terminal.
class SyntheticTask final : public TaskAdapter {
public:
    explicit SyntheticTask(RefillPolicy policy = RefillPolicy::keep_all, bool terminate = false)
        : policy_(policy), terminate_(terminate) {}

    std::string name() const override { return "synthetic"; }
    const std::string& query() const override { return query_; }
    RefillPolicy refill_policy() const override { return policy_; }
    std::string generation_prompt(const Thought* parent) const override { return parent ? parent->content : query_; }
    std::vector<std::string> split_reply(std::string_view reply, const Thought*) const override {
        std::vector<std::string> out;
        for (auto l : split_lines(reply))
            if (!trim(l).empty()) out.emplace_back(trim(l));
        return out;
    }
    std::optional<std::string> prune_before_selection(std::string_view content) const override {
        if (!utility_of(last_step(content))) return "no utility tag";
        return std::nullopt;
    }
    bool is_answer(std::string_view content) const override {
        return last_step(content).find(" ANSWER") != std::string_view::npos;
    }
    bool terminate_on_answer() const override { return terminate_; }
    std::string comparison_view(std::string_view content) const override { return std::string(last_step(content)); }
    std::optional<std::string> extract_answer(std::string_view content) const override {
        if (!is_answer(content)) return std::nullopt;
        return std::string(last_step(content));
    }
    std::optional<bool> score(const std::string&) const override { return std::nullopt; }

    static std::string_view last_step(std::string_view content) {
        const auto nl = content.rfind('\n');
        return nl == std::string_view::npos ? content : content.substr(nl + 1);
    }
    static std::optional<double> utility_of(std::string_view step) {
        const auto p = step.find(" u=");
        if (p == std::string_view::npos) return std::nullopt;
        try {
            return std::stod(std::string(step.substr(p + 3)));
        } catch (...) {
            return std::nullopt;
        }
    }

private:
    RefillPolicy policy_;
    bool terminate_;
    std::string query_ = "synthetic";
};

struct SyntheticScriptOptions {
    std::uint64_t seed = 0;
    double answer_rate = 0.2; // chance a step is terminal
    int answer_min_depth = 2; // no terminal steps above this depth
};

/// Emits `fanout` steps per parent with seeded utilities in [0, 1).
inline ScriptedGenerator synthetic_generator(SyntheticScriptOptions opt) {
    return ScriptedGenerator([opt](const GenerationRequest& req) {
        std::vector<std::string> steps;
        const auto parent = req.parent ? req.parent->id : 0;
        const int depth = req.parent ? req.parent->depth + 1 : 1;
        for (int k = 0; k < req.fanout; ++k) {
            Rng rng(derive_seed(opt.seed, {tag("synthetic"), static_cast<std::uint64_t>(req.round), parent,
                                           static_cast<std::uint64_t>(k)}));
            char buf[96];
            std::snprintf(buf, sizeof buf, "r%dp%llun%d u=%.6f", req.round, static_cast<unsigned long long>(parent), k,
                          rng.uniform());
            std::string s = buf;
            if (depth >= opt.answer_min_depth && rng.bernoulli(opt.answer_rate)) s += " ANSWER";
            steps.push_back(std::move(s));
        }
        return steps;
    });
}

/// Oracle over synthetic views: p(a, b) = clamp(1/2 + slope·(u_a − u_b), 0, 1).
/// A large slope gives a perfect oracle.
inline SimulatedOracle synthetic_oracle(double slope, std::uint64_t seed) {
    return SimulatedOracle(
        [slope](const Thought& a, const Thought& b) {
            const double ua = SyntheticTask::utility_of(a.content).value_or(0.0);
            const double ub = SyntheticTask::utility_of(b.content).value_or(0.0);
            return std::clamp(0.5 + slope * (ua - ub), 0.0, 1.0);
        },
        seed);
}

} // namespace ctot
