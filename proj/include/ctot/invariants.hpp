#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctot/orchestrator.hpp"

namespace ctot {

/// Structural checks on a finished (or aborted) run. Returns one message per
/// violation; empty means every invariant held.
inline std::vector<std::string> check_run_invariants(const RunResult& r, RefillPolicy policy) {
    std::vector<std::string> bad;
    const auto& st = r.state;
    auto id_str = [](ThoughtId id) { return std::to_string(id); };

    // conservation
    std::size_t generated = 0;
    for (const auto& rec : st.rounds) generated += rec.generated.size();
    std::map<ThoughtStatus, std::size_t> by_status;
    for (const auto& [id, t] : st.tree) ++by_status[t.status];
    std::size_t total = 0;
    for (const auto& [s, n] : by_status) total += n;
    if (total != generated || st.tree.size() != generated)
        bad.push_back("conservation: " + std::to_string(total) + " statuses for " + std::to_string(generated) + " generated");

    // list membership
    std::set<ThoughtId> remain(st.remain_list.begin(), st.remain_list.end());
    std::set<ThoughtId> answers(st.answer_list.begin(), st.answer_list.end());
    for (auto id : remain) {
        if (!st.tree.count(id)) bad.push_back("remain id " + id_str(id) + " not in tree");
        else if (st.at(id).status != ThoughtStatus::remain) bad.push_back("remain id " + id_str(id) + " has wrong status");
        if (answers.count(id)) bad.push_back("id " + id_str(id) + " in both remain and answer lists");
    }
    for (auto id : answers) {
        if (!st.tree.count(id)) bad.push_back("answer id " + id_str(id) + " not in tree");
        else if (st.at(id).status != ThoughtStatus::answer) bad.push_back("answer id " + id_str(id) + " has wrong status");
    }
    if (answers.size() != st.answer_list.size()) bad.push_back("duplicate ids in answer list");

    // answer exclusion and remain reachability across rounds
    std::set<ThoughtId> answered;
    for (std::size_t k = 0; k < st.rounds.size(); ++k) {
        const auto& rec = st.rounds[k];
        for (auto id : rec.candidates)
            if (answered.count(id)) bad.push_back("round " + std::to_string(rec.round) + ": answer " + id_str(id) + " re-entered");
        for (auto id : rec.answers) answered.insert(id);
        if (k + 1 == st.rounds.size()) continue;
        const auto& next = st.rounds[k + 1];
        std::set<ThoughtId> reached(next.candidates.begin(), next.candidates.end());
        reached.insert(next.evicted.begin(), next.evicted.end());
        if (policy != RefillPolicy::keep_all) {
            reached.insert(next.refilled.begin(), next.refilled.end());
            reached.insert(next.remain.begin(), next.remain.end());
        }
        for (auto id : rec.remain)
            if (!reached.count(id))
                bad.push_back("round " + std::to_string(next.round) + ": remain thought " + id_str(id) + " unreachable");
    }

    // lineage
    for (const auto& [id, t] : st.tree) {
        if (!t.parent) {
            if (t.depth != 1) bad.push_back("root " + id_str(id) + " has depth " + std::to_string(t.depth));
            continue;
        }
        auto it = st.tree.find(*t.parent);
        if (it == st.tree.end()) {
            bad.push_back("thought " + id_str(id) + " has unknown parent");
            continue;
        }
        const auto& p = it->second;
        if (t.depth != p.depth + 1) bad.push_back("thought " + id_str(id) + " depth mismatch");
        const auto prefix = p.content + "\n";
        if (t.content.size() <= prefix.size() || t.content.compare(0, prefix.size(), prefix) != 0)
            bad.push_back("thought " + id_str(id) + " does not extend its parent's chain");
    }
    for (auto id : st.answer_list) {
        // rebuild the chain from per-node steps, root first
        std::vector<const Thought*> path;
        for (const Thought* t = &st.at(id); t; t = t->parent ? &st.at(*t->parent) : nullptr) path.push_back(t);
        std::string chain;
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            const Thought* t = *it;
            const auto step = t->parent ? t->content.substr(st.at(*t->parent).content.size() + 1) : t->content;
            chain += (chain.empty() ? "" : "\n") + step;
        }
        if (chain != st.at(id).content) bad.push_back("answer " + id_str(id) + " chain does not reconstruct");
    }
    return bad;
}

} // namespace ctot
