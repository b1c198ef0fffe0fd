#pragma once

#include <atomic>
#include <string>

#include "ctot/generator.hpp"
#include "ctot/llm/gateway.hpp"
#include "ctot/oracle.hpp"
#include "ctot/random.hpp"
#include "ctot/tasks/prompts.hpp"

namespace ctot::llm {

struct ModelSettings {
    std::string model = "gpt-3.5-turbo-1106";
    double generation_temperature = 0.7;
    double comparison_temperature = 0.7;
    std::optional<int> max_tokens;
};

/// Comparison oracle backed by the chat gateway. Thoughts passed in carry the
/// task's comparison view as content. An unparseable reply is retried once
/// with the next prompt variant, then settled by a seeded coin.
class LlmOracle final : public OracleBase {
public:
    LlmOracle(Gateway& gateway, TaskKind task, ModelSettings settings, std::uint64_t seed, int puzzle_size = 0)
        : gw_(gateway), task_(task), settings_(std::move(settings)), seed_(seed), puzzle_size_(puzzle_size) {}

    Winner compare(const Thought& a, const Thought& b, const CompareContext& ctx) override {
        if (a.id == b.id) throw std::invalid_argument("oracle_compare: a thought cannot be compared with itself");
        int variant = ctx.variant;
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto req = ChatRequest::user(settings_.model,
                                         build_comparison_prompt(task_, a.content, b.content, variant, puzzle_size_),
                                         settings_.comparison_temperature);
            req.max_tokens = settings_.max_tokens;
            ChatResponse res;
            try {
                res = gw_.chat(req);
            } catch (const GatewayError& e) {
                throw OracleUnavailable(e.what());
            }
            if (auto w = parse_comparison_reply(res.text)) return *w;
            unparseable_.fetch_add(1, std::memory_order_relaxed);
            variant = variant % 3 + 1;
        }
        coin_flips_.fetch_add(1, std::memory_order_relaxed);
        Rng coin(derive_seed(seed_, {tag("reply-tie"), a.id, b.id, static_cast<std::uint64_t>(ctx.layer),
                                     static_cast<std::uint64_t>(ctx.halving_round), ctx.pair_index,
                                     static_cast<std::uint64_t>(ctx.vote_index)}));
        return coin.bernoulli(0.5) ? Winner::first : Winner::second;
    }

    std::uint64_t unparseable_replies() const { return unparseable_.load(); }
    std::uint64_t coin_flips() const { return coin_flips_.load(); }

private:
    Gateway& gw_;
    TaskKind task_;
    ModelSettings settings_;
    std::uint64_t seed_;
    int puzzle_size_;
    std::atomic<std::uint64_t> unparseable_{0}, coin_flips_{0};
};

/// Thought generator backed by the chat gateway.
class LlmGenerator final : public Generator {
public:
    LlmGenerator(Gateway& gateway, ModelSettings settings) : gw_(gateway), settings_(std::move(settings)) {}

    std::vector<std::string> generate(const GenerationRequest& req) override {
        const auto prompt = req.task.generation_prompt(req.parent);
        std::vector<std::string> steps;
        for (int c = 0; c < req.task.generation_calls(req.fanout); ++c) {
            auto chat = ChatRequest::user(settings_.model, prompt, settings_.generation_temperature);
            chat.max_tokens = settings_.max_tokens;
            auto res = gw_.chat(chat);
            for (auto& s : req.task.split_reply(res.text, req.parent)) steps.push_back(std::move(s));
        }
        return steps;
    }

private:
    Gateway& gw_;
    ModelSettings settings_;
};

} // namespace ctot::llm
