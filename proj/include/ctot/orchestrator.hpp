#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctot/generator.hpp"
#include "ctot/oracle.hpp"
#include "ctot/selection.hpp"
#include "ctot/tasks/adapter.hpp"
#include "ctot/thought.hpp"

namespace ctot {

inline constexpr int kTraceSchemaVersion = 1;

struct TreeConfig {
    int depth_T = 3;
    int fanout_m = 12;
    int select_K = 3;
    SelectionParams selection;
    std::optional<int> eviction_threshold; // evict remain thoughts with compare_count above this
    std::optional<RefillPolicy> refill;     // task default when unset
    int generation_workers = 1;             // parents expanded concurrently
    std::uint64_t seed = 0;

    void validate() const {
        if (depth_T < 1) throw std::invalid_argument("depth_T must be >= 1");
        if (fanout_m < 1) throw std::invalid_argument("fanout_m must be >= 1");
        if (select_K < 1) throw std::invalid_argument("select_K must be >= 1");
        if (eviction_threshold && *eviction_threshold < 0) throw std::invalid_argument("eviction_threshold must be >= 0");
        if (generation_workers < 1) throw std::invalid_argument("generation_workers must be >= 1");
        auto s = selection;
        s.K = static_cast<std::size_t>(select_K);
        s.validate();
    }

    /// Per-task defaults: QA (T=3, m=12, K=3), Game of 24 (T=6, K=5),
    /// Sudoku (T=15, m=5, K=3). LLM-backed dueling runs cap duels at 3.
    static TreeConfig defaults_for(const std::string& task) {
        TreeConfig c;
        c.selection.n = 3;
        c.selection.budget_cap = 3;
        c.selection.gamma = 0.1;
        if (task == "qa") {
            c.depth_T = 3, c.fanout_m = 12, c.select_K = 3;
        } else if (task == "game24") {
            c.depth_T = 6, c.fanout_m = 8, c.select_K = 5;
        } else if (task == "sudoku") {
            c.depth_T = 15, c.fanout_m = 5, c.select_K = 3;
        } else {
            throw std::invalid_argument("no defaults for task " + task);
        }
        c.selection.K = static_cast<std::size_t>(c.select_K);
        return c;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["depth_T"] = depth_T;
        j["fanout_m"] = fanout_m;
        j["select_K"] = select_K;
        j["selection"] = selection.to_json();
        j["eviction_threshold"] = eviction_threshold ? nlohmann::ordered_json(*eviction_threshold) : nullptr;
        j["refill"] = refill ? nlohmann::ordered_json(to_string(*refill)) : nullptr;
        j["generation_workers"] = generation_workers;
        j["seed"] = seed;
        return j;
    }

    /// Missing keys keep the values already in `base`.
    static TreeConfig from_json(const nlohmann::json& j) { return from_json(j, TreeConfig{}); }
    static TreeConfig from_json(const nlohmann::json& j, TreeConfig base) {
        base.depth_T = j.value("depth_T", base.depth_T);
        base.fanout_m = j.value("fanout_m", base.fanout_m);
        base.select_K = j.value("select_K", base.select_K);
        if (j.contains("selection")) {
            auto merged = nlohmann::json::parse(base.selection.to_json().dump());
            merged.update(j["selection"]);
            base.selection = SelectionParams::from_json(merged);
        }
        if (j.contains("eviction_threshold"))
            base.eviction_threshold =
                j["eviction_threshold"].is_null() ? std::nullopt : std::optional<int>(j["eviction_threshold"].get<int>());
        if (j.contains("refill") && !j["refill"].is_null()) {
            const auto r = j["refill"].get<std::string>();
            if (r == "keep-all") base.refill = RefillPolicy::keep_all;
            else if (r == "topup-2K") base.refill = RefillPolicy::topup_2k;
            else if (r == "refill-to-K") base.refill = RefillPolicy::refill_to_k;
            else throw std::invalid_argument("unknown refill policy " + r);
        }
        base.generation_workers = j.value("generation_workers", base.generation_workers);
        base.seed = j.value("seed", base.seed);
        base.selection.K = static_cast<std::size_t>(base.select_K);
        return base;
    }
};

struct PruneRecord {
    ThoughtId id;
    std::string reason;
};

/// One round of the trace.
struct RoundRecord {
    int round = 0;
    std::vector<Thought> generated; // as born this round
    std::vector<PruneRecord> pruned;
    std::vector<ThoughtId> evicted;
    std::vector<ThoughtId> refilled; // remain thoughts that re-entered the candidate set
    std::vector<ThoughtId> candidates;
    std::vector<Match> pairings;
    std::uint64_t comparisons = 0;
    std::uint64_t tokens_prompt = 0;
    std::uint64_t tokens_completion = 0;
    std::vector<ThoughtId> selected;
    std::vector<ThoughtId> remain;
    std::vector<ThoughtId> answers;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["round"] = round;
        j["candidates"] = candidates;
        auto pairs = nlohmann::ordered_json::array();
        for (const auto& m : pairings)
            pairs.push_back({{"first", m.first},
                             {"second", m.second},
                             {"winner", m.winner},
                             {"halving_round", m.halving_round},
                             {"comparisons", m.comparisons}});
        j["pairings"] = pairs;
        j["comparisons"] = comparisons;
        j["tokens_prompt"] = tokens_prompt;
        j["tokens_completion"] = tokens_completion;
        j["selected"] = selected;
        j["remain"] = remain;
        j["answers"] = answers;
        auto gen = nlohmann::ordered_json::array();
        for (const auto& t : generated) {
            nlohmann::ordered_json g;
            g["id"] = t.id;
            g["parent"] = t.parent ? nlohmann::ordered_json(*t.parent) : nullptr;
            g["depth"] = t.depth;
            g["content"] = t.content;
            gen.push_back(std::move(g));
        }
        j["generated"] = gen;
        auto pr = nlohmann::ordered_json::array();
        for (const auto& p : pruned) pr.push_back({{"id", p.id}, {"reason", p.reason}});
        j["pruned"] = pr;
        j["evicted"] = evicted;
        j["refilled"] = refilled;
        return j;
    }
};

struct RunState {
    int round = 0;
    std::map<ThoughtId, Thought> tree;
    std::deque<ThoughtId> remain_list; // oldest first
    std::vector<ThoughtId> answer_list;
    std::vector<ThoughtId> select_list; // expansion frontier for the next round
    std::vector<RoundRecord> rounds;

    const Thought& at(ThoughtId id) const { return tree.at(id); }
};

struct RunResult {
    RunState state;
    std::optional<std::string> final_answer; // nullopt = unsolved / abstain
    std::vector<std::string> trace_lines;    // JSONL, header first
    std::string error;                       // set when the run aborted

    std::string trace_jsonl() const {
        std::string s;
        for (const auto& l : trace_lines) s += l + "\n";
        return s;
    }
};

/// Generator or oracle failure; `partial` holds the trace up to the failure.
struct RunAborted : std::runtime_error {
    RunAborted(const std::string& what, RunResult p) : std::runtime_error(what), partial(std::move(p)) {}
    RunResult partial;
};

/// Token totals source for per-round accounting (e.g. a gateway ledger).
using TokenProbe = std::function<std::pair<std::uint64_t, std::uint64_t>()>;
using RoundObserver = std::function<void(const RoundRecord&, const RunState&)>;

struct RunHooks {
    TokenProbe tokens;
    RoundObserver on_round;
};

/// QA: modal answer with a seeded tie-break; other tasks: first answer that
/// the task validates. nullopt when there is none.
inline std::optional<std::string> finalize(const RunState& state, const TaskAdapter& task, std::uint64_t seed) {
    if (task.finalize_by_majority()) {
        std::map<std::string, int> votes;
        for (auto id : state.answer_list)
            if (auto a = task.extract_answer(state.at(id).content)) ++votes[*a];
        if (votes.empty()) return std::nullopt;
        int best = 0;
        for (const auto& [a, n] : votes) best = std::max(best, n);
        std::vector<std::string> tied;
        for (const auto& [a, n] : votes)
            if (n == best) tied.push_back(a);
        if (tied.size() == 1) return tied.front();
        Rng coin(derive_seed(seed, {tag("finalize")}));
        return tied[coin.below(tied.size())];
    }
    for (auto id : state.answer_list)
        if (auto a = task.extract_answer(state.at(id).content)) return a;
    return std::nullopt;
}

namespace detail {

inline std::string trace_header(const TaskAdapter& task, const TreeConfig& cfg) {
    nlohmann::ordered_json h;
    h["schema"] = "ctot.trace";
    h["version"] = kTraceSchemaVersion;
    h["task"] = task.name();
    h["query"] = task.query();
    h["refill"] = to_string(cfg.refill.value_or(task.refill_policy()));
    h["config"] = cfg.to_json();
    return h.dump();
}

} // namespace detail

/// Moves over-compared remain thoughts to evicted (returned in order).
inline std::vector<ThoughtId> evict_overcompared(RunState& state, const TreeConfig& cfg) {
    std::vector<ThoughtId> out;
    if (!cfg.eviction_threshold) return out;
    std::deque<ThoughtId> keep;
    for (auto id : state.remain_list) {
        auto& t = state.tree.at(id);
        if (t.compare_count > *cfg.eviction_threshold) {
            t.move_to(ThoughtStatus::evicted);
            out.push_back(id);
        } else {
            keep.push_back(id);
        }
    }
    state.remain_list = std::move(keep);
    return out;
}

/// Candidate set for this round: the fresh thoughts plus any remain-list
/// refill the policy allows. Refilled thoughts become active again.
inline std::vector<ThoughtId> assemble_candidates(const std::vector<ThoughtId>& fresh, RunState& state,
                                                  const TreeConfig& cfg, RefillPolicy policy,
                                                  std::vector<ThoughtId>* evicted = nullptr,
                                                  std::vector<ThoughtId>* refilled = nullptr) {
    auto ev = evict_overcompared(state, cfg);
    if (evicted) evicted->insert(evicted->end(), ev.begin(), ev.end());
    std::vector<ThoughtId> cand = fresh;
    auto take = [&] {
        const auto id = state.remain_list.front();
        state.remain_list.pop_front();
        state.tree.at(id).move_to(ThoughtStatus::active);
        cand.push_back(id);
        if (refilled) refilled->push_back(id);
    };
    const auto two_k = static_cast<std::size_t>(2 * cfg.select_K);
    switch (policy) {
    case RefillPolicy::keep_all:
        while (!state.remain_list.empty()) take();
        break;
    case RefillPolicy::topup_2k:
        if (fresh.size() <= two_k)
            while (cand.size() < two_k && !state.remain_list.empty()) take();
        break;
    case RefillPolicy::refill_to_k: break;
    }
    return cand;
}

/// Applies a selection: counters, post-selection pruning, answer/remain/
/// frontier moves, and the refill-to-K top-up.
inline void update_lists(const SelectionResult& sel, RunState& state, const TaskAdapter& task, const TreeConfig& cfg,
                         RefillPolicy policy, RoundRecord& rec) {
    for (const auto& m : sel.matches) {
        ++state.tree.at(m.first).compare_count;
        ++state.tree.at(m.second).compare_count;
    }
    auto prune_if_invalid = [&](ThoughtId id) {
        auto& t = state.tree.at(id);
        if (auto why = task.prune_after_selection(t.content)) {
            t.move_to(ThoughtStatus::pruned);
            rec.pruned.push_back({id, *why});
            return true;
        }
        return false;
    };
    std::vector<ThoughtId> selected;
    for (auto id : sel.selected)
        if (!prune_if_invalid(id)) selected.push_back(id);
    for (auto id : sel.eliminated) {
        if (prune_if_invalid(id)) continue;
        state.tree.at(id).move_to(ThoughtStatus::remain);
        state.remain_list.push_back(id);
    }
    if (policy == RefillPolicy::refill_to_k) {
        auto ev = evict_overcompared(state, cfg);
        rec.evicted.insert(rec.evicted.end(), ev.begin(), ev.end());
        // Oldest first; the freshly eliminated sit at the back.
        while (selected.size() < static_cast<std::size_t>(cfg.select_K) && !state.remain_list.empty()) {
            const auto id = state.remain_list.front();
            state.remain_list.pop_front();
            auto& t = state.tree.at(id);
            t.move_to(ThoughtStatus::active);
            rec.refilled.push_back(id);
            if (!prune_if_invalid(id)) selected.push_back(id);
        }
    }
    state.select_list.clear();
    for (auto id : selected) {
        auto& t = state.tree.at(id);
        if (task.is_answer(t.content)) {
            t.move_to(ThoughtStatus::answer);
            state.answer_list.push_back(id);
        } else {
            state.select_list.push_back(id);
        }
    }
    rec.selected = selected;
}

/// The tree loop: generate, prune, assemble, select, update lists, and stop
/// after T rounds, on a final answer (tasks that terminate on one), or when
/// nothing is left to expand or revisit.
template <ComparisonOracle O>
RunResult run(const TaskAdapter& task, const TreeConfig& cfg, Generator& generator, O& oracle, const RunHooks& hooks = {}) {
    cfg.validate();
    const auto policy = cfg.refill.value_or(task.refill_policy());
    RunResult out;
    auto& state = out.state;
    out.trace_lines.push_back(detail::trace_header(task, cfg));
    ThoughtId next_id = 1;
    bool expanded_root = false;

    auto abort = [&](const std::string& why, RoundRecord&& partial) -> RunAborted {
        out.error = why;
        state.rounds.push_back(partial);
        auto j = partial.to_json();
        j["aborted"] = why;
        out.trace_lines.push_back(j.dump());
        return RunAborted(why, std::move(out));
    };

    for (int t = 1; t <= cfg.depth_T; ++t) {
        state.round = t;
        RoundRecord rec;
        rec.round = t;
        const auto tokens_before = hooks.tokens ? hooks.tokens() : std::pair<std::uint64_t, std::uint64_t>{0, 0};

        // 1. generate
        std::vector<const Thought*> parents;
        if (!expanded_root) parents.push_back(nullptr);
        for (auto id : state.select_list) parents.push_back(&state.tree.at(id));
        expanded_root = true;
        std::vector<std::vector<std::string>> steps(parents.size());
        try {
            if (cfg.generation_workers > 1 && parents.size() > 1) {
                for (std::size_t b = 0; b < parents.size(); b += static_cast<std::size_t>(cfg.generation_workers)) {
                    std::vector<std::future<std::vector<std::string>>> jobs;
                    const auto e = std::min(parents.size(), b + static_cast<std::size_t>(cfg.generation_workers));
                    for (std::size_t i = b; i < e; ++i)
                        jobs.push_back(std::async(std::launch::async, [&, i] {
                            return generator.generate({task, parents[i], t, i, cfg.fanout_m});
                        }));
                    for (std::size_t i = b; i < e; ++i) steps[i] = jobs[i - b].get();
                }
            } else {
                for (std::size_t i = 0; i < parents.size(); ++i)
                    steps[i] = generator.generate({task, parents[i], t, i, cfg.fanout_m});
            }
        } catch (const std::exception& e) {
            throw abort(std::string("generation failed: ") + e.what(), std::move(rec));
        }
        std::vector<ThoughtId> fresh;
        for (std::size_t i = 0; i < parents.size(); ++i) {
            for (auto& s : steps[i]) {
                if (trim(s).empty()) continue;
                Thought th;
                th.id = next_id++;
                th.born_round = t;
                if (parents[i]) {
                    th.parent = parents[i]->id;
                    th.depth = parents[i]->depth + 1;
                    th.content = parents[i]->content + "\n" + s;
                } else {
                    th.content = s;
                }
                rec.generated.push_back(th);
                fresh.push_back(th.id);
                state.tree.emplace(th.id, std::move(th));
            }
        }
        // Expanded parents are done; they keep status active as interior nodes.
        state.select_list.clear();

        // 2. prune; tasks that stop on an answer bank it straight away
        std::vector<ThoughtId> survivors;
        for (auto id : fresh) {
            auto& th = state.tree.at(id);
            if (auto why = task.prune_before_selection(th.content)) {
                th.move_to(ThoughtStatus::pruned);
                rec.pruned.push_back({id, *why});
            } else if (task.terminate_on_answer() && task.is_answer(th.content)) {
                th.move_to(ThoughtStatus::answer);
                state.answer_list.push_back(id);
            } else {
                survivors.push_back(id);
            }
        }

        // 3. assemble
        rec.candidates = assemble_candidates(survivors, state, cfg, policy, &rec.evicted, &rec.refilled);

        // 4. select
        SelectionResult sel;
        if (!rec.candidates.empty()) {
            std::vector<Thought> views;
            views.reserve(rec.candidates.size());
            for (auto id : rec.candidates) {
                Thought v = state.tree.at(id);
                v.content = task.comparison_view(v.content);
                views.push_back(std::move(v));
            }
            auto params = cfg.selection;
            params.K = static_cast<std::size_t>(cfg.select_K);
            params.seed = derive_seed(cfg.seed, {tag("select"), static_cast<std::uint64_t>(t), cfg.selection.seed});
            CompareContext base;
            base.layer = t;
            base.stream = cfg.seed;
            try {
                sel = select(std::span<const Thought>(views), params, oracle, base);
            } catch (const SelectionInterrupted& e) {
                rec.pairings = e.partial.matches;
                rec.comparisons = e.partial.comparisons_used;
                throw abort(std::string("selection failed: ") + e.what(), std::move(rec));
            }
        }
        rec.pairings = sel.matches;
        rec.comparisons = sel.comparisons_used;

        // 5. lists
        update_lists(sel, state, task, cfg, policy, rec);
        rec.remain.assign(state.remain_list.begin(), state.remain_list.end());
        rec.answers = state.answer_list;
        if (hooks.tokens) {
            const auto after = hooks.tokens();
            rec.tokens_prompt = after.first - tokens_before.first;
            rec.tokens_completion = after.second - tokens_before.second;
        }
        out.trace_lines.push_back(rec.to_json().dump());
        state.rounds.push_back(std::move(rec));
        if (hooks.on_round) hooks.on_round(state.rounds.back(), state);

        // 6. terminate
        if (task.terminate_on_answer() && !state.answer_list.empty()) break;
        if (state.select_list.empty() && state.remain_list.empty()) break;
    }
    out.final_answer = finalize(state, task, cfg.seed);
    nlohmann::ordered_json fin;
    fin["final"] = out.final_answer ? nlohmann::ordered_json(*out.final_answer) : nullptr;
    fin["rounds"] = state.rounds.size();
    fin["answers"] = state.answer_list;
    out.trace_lines.push_back(fin.dump());
    return out;
}

} // namespace ctot
