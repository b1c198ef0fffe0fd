#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "ctot/invariants.hpp"
#include "ctot/llm/oracle.hpp"
#include "ctot/orchestrator.hpp"
#include "ctot/preference.hpp"
#include "ctot/selection.hpp"
#include "ctot/sim.hpp"
#include "ctot/tasks/datasets.hpp"

namespace ctot::harness {

using ojson = nlohmann::ordered_json;

/// fn(i) for every i in [0, n) on up to `workers` threads. Callers write
/// results by index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto body = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w) pool.emplace_back(body);
    }
    if (failure) std::rethrow_exception(failure);
}

struct Stats {
    double mean = 0, stdev = 0;
    std::uint64_t min = 0, max = 0;

    ojson to_json() const { return {{"mean", mean}, {"stdev", stdev}, {"min", min}, {"max", max}}; }
};

/// Mean, sample standard deviation, min and max.
inline Stats summarize(std::span<const std::uint64_t> xs) {
    Stats s;
    if (xs.empty()) return s;
    double sum = 0;
    for (auto x : xs) sum += static_cast<double>(x);
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0;
        for (auto x : xs) ss += (static_cast<double>(x) - s.mean) * (static_cast<double>(x) - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// ---------------------------------------------------------------- models

/// Simulated preference model family.
///   linear: utilities 0, gap, 2 gap, ...; p = clamp(1/2 + slope (u_i - u_j))
///   btl:    weights ratio^i
///   matrix: explicit win probabilities `p` (size is taken from it)
struct ModelSpec {
    std::string kind = "linear";
    std::size_t size = 16;
    double gap = 1.0;
    double slope = 0.05;
    double ratio = 1.5;
    std::vector<std::vector<double>> p;

    ojson to_json() const {
        ojson j{{"kind", kind}, {"size", size}};
        if (kind == "linear") {
            j["gap"] = gap;
            j["slope"] = slope;
        } else if (kind == "btl") {
            j["ratio"] = ratio;
        } else {
            j["size"] = p.size();
            j["p"] = p;
        }
        return j;
    }
    void merge(const nlohmann::json& j) {
        kind = j.value("kind", kind);
        size = j.value("size", size);
        gap = j.value("gap", gap);
        slope = j.value("slope", slope);
        ratio = j.value("ratio", ratio);
        p = j.value("p", p);
    }
    PreferenceModel build() const {
        if (kind == "matrix") {
            if (p.empty()) throw std::invalid_argument("matrix model needs p");
            return PreferenceModel::from_matrix(p);
        }
        if (size < 1) throw std::invalid_argument("model size must be >= 1");
        if (kind == "linear") {
            std::vector<double> u(size);
            for (std::size_t i = 0; i < size; ++i) u[i] = gap * static_cast<double>(i);
            return build_linear_model(std::move(u), slope);
        }
        if (kind == "btl") {
            std::vector<double> w(size);
            for (std::size_t i = 0; i < size; ++i) w[i] = std::pow(ratio, static_cast<double>(i));
            return build_btl_model(std::move(w));
        }
        throw std::invalid_argument("unknown model kind " + kind);
    }
};

/// The model fails the triangle inequality, so the PAC guarantee does not apply.
struct ModelRejected : std::runtime_error {
    explicit ModelRejected(std::vector<TransitivityWitness> w)
        : std::runtime_error(describe(w)), witnesses(std::move(w)) {}
    std::vector<TransitivityWitness> witnesses;

private:
    static std::string describe(const std::vector<TransitivityWitness>& w) {
        std::string s = "preference model violates the triangle inequality; witnesses (i, j, k):";
        for (std::size_t k = 0; k < std::min<std::size_t>(w.size(), 5); ++k)
            s += " (" + std::to_string(w[k].i) + ", " + std::to_string(w[k].j) + ", " + std::to_string(w[k].k) + ")";
        if (w.size() > 5) s += " ...";
        return s;
    }
};

inline void merge_selection(SelectionParams& p, const nlohmann::json& j) {
    auto merged = nlohmann::json::parse(p.to_json().dump());
    merged.update(j);
    p = SelectionParams::from_json(merged);
}

inline SelectionParams pac_selection_defaults() {
    SelectionParams p;
    p.mode = SelectionMode::dueling;
    p.K = 1;
    p.epsilon = 0.3;
    p.delta = 0.1;
    p.gamma = 1.0;
    return p;
}

// ---------------------------------------------------------------- PAC sim

struct PacSpec {
    ModelSpec model;
    SelectionParams selection = pac_selection_defaults();
    int trials = 500;
    std::uint64_t seed = 0;
    int workers = 1; // not part of the echo; results do not depend on it

    ojson to_json() const {
        return {{"kind", "pac-sim"}, {"model", model.to_json()}, {"selection", selection.to_json()}, {"trials", trials},
                {"seed", seed}};
    }
    void merge(const nlohmann::json& j) {
        if (j.contains("model")) model.merge(j["model"]);
        if (j.contains("selection")) merge_selection(selection, j["selection"]);
        trials = j.value("trials", trials);
        seed = j.value("seed", seed);
        workers = j.value("workers", workers);
    }
};

struct PacReport {
    ojson config;
    int trials = 0;
    int successes = 0;
    double success_rate = 0;
    Stats comparisons;
    std::vector<std::uint64_t> per_trial; // comparisons per trial
    double wall_seconds = 0;

    ojson metrics() const {
        return {{"trials", trials},
                {"successes", successes},
                {"success_rate", success_rate},
                {"comparisons_mean", comparisons.mean},
                {"comparisons_stdev", comparisons.stdev},
                {"comparisons_min", comparisons.min},
                {"comparisons_max", comparisons.max}};
    }
};

/// Repeated selection on a known model. A trial succeeds when some selected
/// item is an epsilon-maximum (epsilon from the selection params).
inline PacReport run_pac_sim(const PacSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
    const auto model = spec.model.build();
    auto check = check_transitivity(model);
    if (!check.triangle_ok) throw ModelRejected(std::move(check.witnesses));
    spec.selection.validate();

    std::vector<Thought> items(model.size());
    for (std::size_t i = 0; i < items.size(); ++i) items[i].id = i;
    const auto n = static_cast<std::size_t>(spec.trials);
    std::vector<char> ok(n);
    std::vector<std::uint64_t> comps(n);
    parallel_for(n, spec.workers, [&](std::size_t i) {
        const auto s = derive_seed(spec.seed, {tag("pac-trial"), i});
        auto params = spec.selection;
        params.seed = s;
        SimulatedOracle oracle(model, s);
        CompareContext ctx;
        ctx.stream = i;
        const auto r = select(std::span<const Thought>(items), params, oracle, ctx);
        ok[i] = std::any_of(r.selected.begin(), r.selected.end(),
                            [&](ThoughtId w) { return model.is_epsilon_maximum(w, spec.selection.epsilon); });
        comps[i] = r.comparisons_used;
    });

    PacReport rep;
    rep.config = spec.to_json();
    rep.trials = spec.trials;
    rep.successes = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    rep.success_rate = static_cast<double>(rep.successes) / static_cast<double>(n);
    rep.comparisons = summarize(comps);
    rep.per_trial = std::move(comps);
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

/// 1 - delta minus three binomial standard errors, rounded down to 0.01.
inline double pac_floor(double delta, int trials) {
    const double slack = 3.0 * std::sqrt(delta * (1 - delta) / trials);
    return std::floor((1.0 - delta - slack) * 100.0) / 100.0;
}

// ---------------------------------------------------------------- complexity

struct ComplexitySpec {
    std::vector<std::size_t> sizes{16, 32, 64};
    std::vector<double> epsilons{0.4, 0.2, 0.1};
    std::size_t fixed_size = 16;
    double fixed_epsilon = 0.2;
    double gap = 1.0;
    double slope = 0.01;
    double delta = 0.1;
    double gamma = 1.0;
    int trials = 300;
    std::uint64_t seed = 0;
    int workers = 1;

    ojson to_json() const {
        return {{"kind", "complexity-sim"}, {"sizes", sizes},   {"epsilons", epsilons}, {"fixed_size", fixed_size},
                {"fixed_epsilon", fixed_epsilon}, {"gap", gap}, {"slope", slope},      {"delta", delta},
                {"gamma", gamma},  {"trials", trials}, {"seed", seed}};
    }
    void merge(const nlohmann::json& j) {
        sizes = j.value("sizes", sizes);
        epsilons = j.value("epsilons", epsilons);
        fixed_size = j.value("fixed_size", fixed_size);
        fixed_epsilon = j.value("fixed_epsilon", fixed_epsilon);
        gap = j.value("gap", gap);
        slope = j.value("slope", slope);
        delta = j.value("delta", delta);
        gamma = j.value("gamma", gamma);
        trials = j.value("trials", trials);
        seed = j.value("seed", seed);
        workers = j.value("workers", workers);
    }
};

struct ComplexityPoint {
    std::string sweep; // "size" or "epsilon"
    std::size_t size;
    double epsilon;
    PacReport report;
};

struct ComplexityRatio {
    std::string sweep;
    double from, to; // size or epsilon values
    double ratio;    // mean comparisons at `to` over mean at `from`
};

struct ComplexityReport {
    ojson config;
    std::vector<ComplexityPoint> points;
    std::vector<ComplexityRatio> ratios;
    double wall_seconds = 0;
};

/// Mean dueling comparisons across a |Z| sweep (fixed epsilon) and an
/// epsilon sweep (fixed |Z|), with ratios between neighbouring points.
inline ComplexityReport run_complexity_sim(const ComplexitySpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    ComplexityReport rep;
    rep.config = spec.to_json();
    auto point = [&](const std::string& sweep, std::size_t size, double eps) {
        PacSpec p;
        p.model.kind = "linear";
        p.model.size = size;
        p.model.gap = spec.gap;
        p.model.slope = spec.slope;
        p.selection.epsilon = eps;
        p.selection.delta = spec.delta;
        p.selection.gamma = spec.gamma;
        p.trials = spec.trials;
        p.seed = derive_seed(spec.seed, {tag(sweep), size, static_cast<std::uint64_t>(std::llround(eps * 1e6))});
        p.workers = spec.workers;
        rep.points.push_back({sweep, size, eps, run_pac_sim(p)});
    };
    for (auto z : spec.sizes) point("size", z, spec.fixed_epsilon);
    for (auto e : spec.epsilons) point("epsilon", spec.fixed_size, e);
    for (std::size_t k = 1; k < rep.points.size(); ++k) {
        const auto& a = rep.points[k - 1];
        const auto& b = rep.points[k];
        if (a.sweep != b.sweep) continue;
        const double from = a.sweep == "size" ? static_cast<double>(a.size) : a.epsilon;
        const double to = b.sweep == "size" ? static_cast<double>(b.size) : b.epsilon;
        rep.ratios.push_back({a.sweep, from, to, b.report.comparisons.mean / a.report.comparisons.mean});
    }
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

// ---------------------------------------------------------------- layered retention

/// Selection repeated over layers: each layer's candidates are the previous
/// survivors plus `fresh` new items with utilities uniform in [0, spread).
struct RetentionSpec {
    int layers = 3;
    std::size_t fresh = 16;
    double spread = 16.0;
    double slope = 0.2;
    SelectionParams selection = [] {
        auto p = pac_selection_defaults();
        p.K = 2;
        p.epsilon = 0.1;
        p.budget_cap = 3; // the per-duel cap used with LLM judges
        return p;
    }();
    int trials = 300;
    std::uint64_t seed = 0;
    int workers = 1;

    ojson to_json() const {
        return {{"kind", "retention-sim"}, {"layers", layers}, {"fresh", fresh}, {"spread", spread}, {"slope", slope},
                {"selection", selection.to_json()}, {"trials", trials}, {"seed", seed}};
    }
    void merge(const nlohmann::json& j) {
        layers = j.value("layers", layers);
        fresh = j.value("fresh", fresh);
        spread = j.value("spread", spread);
        slope = j.value("slope", slope);
        if (j.contains("selection")) merge_selection(selection, j["selection"]);
        trials = j.value("trials", trials);
        seed = j.value("seed", seed);
        workers = j.value("workers", workers);
    }
};

struct RetentionReport {
    ojson config;
    std::vector<double> layer_rate;      // survivors hold an eps-maximum of this layer's candidates
    std::vector<double> cumulative_rate; // ... of every item seen up to this layer
    Stats comparisons;
    double wall_seconds = 0;
};

inline RetentionReport run_retention_sim(const RetentionSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    if (spec.layers < 1 || spec.trials < 1 || spec.fresh < 1) throw std::invalid_argument("bad retention spec");
    spec.selection.validate();
    const auto L = static_cast<std::size_t>(spec.layers), n = static_cast<std::size_t>(spec.trials);
    const double eps = spec.selection.epsilon;
    auto p = [&](double ua, double ub) { return std::clamp(0.5 + spec.slope * (ua - ub), 0.0, 1.0); };
    std::vector<std::vector<char>> layer_ok(n, std::vector<char>(L)), cum_ok(n, std::vector<char>(L));
    std::vector<std::uint64_t> comps(n);

    parallel_for(n, spec.workers, [&](std::size_t trial) {
        const auto s = derive_seed(spec.seed, {tag("retention"), trial});
        Rng rng(s);
        std::vector<double> utility; // by id
        std::vector<ThoughtId> survivors;
        double best_seen = -1;
        for (std::size_t layer = 0; layer < L; ++layer) {
            std::vector<Thought> cands;
            for (auto id : survivors) cands.push_back(Thought{id, "", {}});
            for (std::size_t k = 0; k < spec.fresh; ++k) {
                utility.push_back(rng.uniform() * spec.spread);
                cands.push_back(Thought{utility.size() - 1, "", {}});
                best_seen = std::max(best_seen, utility.back());
            }
            SimulatedOracle oracle([&](const Thought& a, const Thought& b) { return p(utility[a.id], utility[b.id]); },
                                   derive_seed(s, {tag("oracle"), layer}));
            auto params = spec.selection;
            params.seed = derive_seed(s, {tag("select"), layer});
            CompareContext ctx;
            ctx.layer = static_cast<int>(layer) + 1;
            const auto r = select(std::span<const Thought>(cands), params, oracle, ctx);
            comps[trial] += r.comparisons_used;
            double best_here = -1;
            for (const auto& c : cands) best_here = std::max(best_here, utility[c.id]);
            survivors = r.selected;
            for (auto id : survivors) {
                if (p(best_here, utility[id]) - 0.5 <= eps + 1e-12) layer_ok[trial][layer] = 1;
                if (p(best_seen, utility[id]) - 0.5 <= eps + 1e-12) cum_ok[trial][layer] = 1;
            }
        }
    });

    RetentionReport rep;
    rep.config = spec.to_json();
    for (std::size_t l = 0; l < L; ++l) {
        std::size_t a = 0, b = 0;
        for (std::size_t t = 0; t < n; ++t) a += layer_ok[t][l], b += cum_ok[t][l];
        rep.layer_rate.push_back(static_cast<double>(a) / static_cast<double>(n));
        rep.cumulative_rate.push_back(static_cast<double>(b) / static_cast<double>(n));
    }
    rep.comparisons = summarize(comps);
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

// ---------------------------------------------------------------- simulated tree runs

struct TreeSimSpec {
    TreeConfig tree = [] {
        TreeConfig c;
        c.depth_T = 3;
        c.fanout_m = 5;
        c.select_K = 2;
        c.selection.n = 3;
        c.selection.K = 2;
        return c;
    }();
    double answer_rate = 0.2;
    int answer_min_depth = 2;
    double slope = 2.0;
    RefillPolicy policy = RefillPolicy::keep_all;
    int trials = 100;
    std::uint64_t seed = 0;
    int workers = 1;

    ojson to_json() const {
        return {{"kind", "tree-sim"},
                {"tree", tree.to_json()},
                {"answer_rate", answer_rate},
                {"answer_min_depth", answer_min_depth},
                {"slope", slope},
                {"policy", to_string(policy)},
                {"trials", trials},
                {"seed", seed}};
    }
    void merge(const nlohmann::json& j) {
        if (j.contains("tree")) tree = TreeConfig::from_json(j["tree"], tree);
        answer_rate = j.value("answer_rate", answer_rate);
        answer_min_depth = j.value("answer_min_depth", answer_min_depth);
        slope = j.value("slope", slope);
        if (j.contains("policy")) {
            const auto s = j["policy"].get<std::string>();
            if (s == "keep-all") policy = RefillPolicy::keep_all;
            else if (s == "topup-2K") policy = RefillPolicy::topup_2k;
            else if (s == "refill-to-K") policy = RefillPolicy::refill_to_k;
            else throw std::invalid_argument("unknown refill policy " + s);
        }
        trials = j.value("trials", trials);
        seed = j.value("seed", seed);
        workers = j.value("workers", workers);
    }
};

struct TreeSimReport {
    ojson config;
    int trials = 0;
    double accuracy = 0; // final answer carries the best utility among generated answers
    int unanswered = 0;
    int invariant_failures = 0;
    std::vector<std::string> first_violations;
    Stats comparisons, generated;
    std::vector<std::string> traces; // per trial JSONL
    double wall_seconds = 0;

    ojson metrics() const {
        return {{"trials", trials},
                {"accuracy", accuracy},
                {"unanswered", unanswered},
                {"invariant_failures", invariant_failures},
                {"comparisons_mean", comparisons.mean},
                {"comparisons_stdev", comparisons.stdev},
                {"generated_mean", generated.mean}};
    }
};

/// One synthetic tree run; trial i is fully determined by (seed, i).
inline RunResult run_tree_trial(const TreeSimSpec& spec, std::size_t i) {
    const auto s = derive_seed(spec.seed, {tag("tree-trial"), i});
    SyntheticTask task(spec.policy, false);
    auto cfg = spec.tree;
    cfg.seed = s;
    auto gen = synthetic_generator({s, spec.answer_rate, spec.answer_min_depth});
    auto oracle = synthetic_oracle(spec.slope, s);
    return run(task, cfg, gen, oracle);
}

inline TreeSimReport run_tree_sim(const TreeSimSpec& spec, bool keep_traces = false) {
    const auto t0 = std::chrono::steady_clock::now();
    if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
    spec.tree.validate();
    const auto n = static_cast<std::size_t>(spec.trials);
    std::vector<char> hit(n), answered(n);
    std::vector<std::uint64_t> comps(n), gens(n);
    std::vector<std::vector<std::string>> violations(n);
    std::vector<std::string> traces(keep_traces ? n : 0);
    parallel_for(n, spec.workers, [&](std::size_t i) {
        const auto r = run_tree_trial(spec, i);
        violations[i] = check_run_invariants(r, spec.policy);
        for (const auto& rec : r.state.rounds) comps[i] += rec.comparisons, gens[i] += rec.generated.size();
        if (keep_traces) traces[i] = r.trace_jsonl();
        if (!r.final_answer) return;
        answered[i] = 1;
        double best = -1;
        for (const auto& [id, t] : r.state.tree)
            if (t.status != ThoughtStatus::pruned && SyntheticTask{}.is_answer(t.content))
                best = std::max(best, SyntheticTask::utility_of(SyntheticTask::last_step(t.content)).value_or(-1));
        hit[i] = SyntheticTask::utility_of(*r.final_answer).value_or(-2) >= best;
    });
    TreeSimReport rep;
    rep.config = spec.to_json();
    rep.trials = spec.trials;
    rep.accuracy = static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(n);
    rep.unanswered = static_cast<int>(std::count(answered.begin(), answered.end(), 0));
    for (const auto& v : violations) {
        if (v.empty()) continue;
        ++rep.invariant_failures;
        if (rep.first_violations.empty()) rep.first_violations = v;
    }
    rep.comparisons = summarize(comps);
    rep.generated = summarize(gens);
    rep.traces = std::move(traces);
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

// ---------------------------------------------------------------- task runs

struct TaskRunSpec {
    TaskKind task = TaskKind::qa;
    std::string dataset;
    std::size_t limit = 0;
    TreeConfig tree = TreeConfig::defaults_for("qa");
    llm::ModelSettings model;
    llm::GatewayMode mode = llm::GatewayMode::replay;
    std::string cassette;
    llm::Prices prices;
    int max_concurrency = 4;
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "OPENAI_API_KEY";
    bool solvable_gate = false; // Game of 24 only
    std::uint64_t seed = 0;

    /// Task defaults for the tree, then `j` on top.
    static TaskRunSpec for_task(TaskKind k) {
        TaskRunSpec s;
        s.task = k;
        s.tree = TreeConfig::defaults_for(to_string(k));
        return s;
    }

    ojson to_json() const {
        ojson m{{"model", model.model},
                {"generation_temperature", model.generation_temperature},
                {"comparison_temperature", model.comparison_temperature},
                {"max_tokens", model.max_tokens ? ojson(*model.max_tokens) : ojson(nullptr)}};
        return {{"kind", "task-run"},
                {"task", to_string(task)},
                {"dataset", dataset},
                {"limit", limit},
                {"tree", tree.to_json()},
                {"model", m},
                {"mode", llm::to_string(mode)},
                {"cassette", cassette},
                {"prices", {{"input", prices.input}, {"output", prices.output}}},
                {"solvable_gate", solvable_gate},
                {"seed", seed}};
    }
    void merge(const nlohmann::json& j) {
        if (j.contains("task")) {
            auto k = parse_task_kind(j["task"].get<std::string>());
            if (!k) throw std::invalid_argument("unknown task " + j["task"].get<std::string>());
            if (*k != task) tree = TreeConfig::defaults_for(to_string(*k));
            task = *k;
        }
        dataset = j.value("dataset", dataset);
        limit = j.value("limit", limit);
        if (j.contains("tree")) tree = TreeConfig::from_json(j["tree"], tree);
        if (j.contains("model")) {
            const auto& m = j["model"];
            model.model = m.value("model", model.model);
            model.generation_temperature = m.value("generation_temperature", model.generation_temperature);
            model.comparison_temperature = m.value("comparison_temperature", model.comparison_temperature);
            if (m.contains("max_tokens"))
                model.max_tokens = m["max_tokens"].is_null() ? std::nullopt : std::optional<int>(m["max_tokens"].get<int>());
        }
        if (j.contains("mode")) mode = llm::parse_gateway_mode(j["mode"].get<std::string>());
        cassette = j.value("cassette", cassette);
        if (j.contains("prices")) {
            prices.input = j["prices"].value("input", prices.input);
            prices.output = j["prices"].value("output", prices.output);
        }
        max_concurrency = j.value("max_concurrency", max_concurrency);
        base_url = j.value("base_url", base_url);
        api_key_env = j.value("api_key_env", api_key_env);
        solvable_gate = j.value("solvable_gate", solvable_gate);
        seed = j.value("seed", seed);
    }
};

inline std::vector<Instance> load_instances(TaskKind k, const std::string& path, std::size_t limit, bool solvable_gate) {
    std::vector<Instance> out;
    switch (k) {
    case TaskKind::qa: out = load_aqua_jsonl(path, limit); break;
    case TaskKind::game24: out = load_game24_csv(path, limit, {solvable_gate}); break;
    case TaskKind::sudoku: out = load_sudoku_json(path, limit); break;
    }
    if (out.empty()) throw DatasetError(path + ": dataset has no instances");
    return out;
}

struct InstanceResult {
    std::string id;
    bool completed = false;
    std::string error;
    std::optional<std::string> final_answer;
    std::optional<bool> correct;
    int rounds = 0;
    std::uint64_t comparisons = 0;
    std::uint64_t tokens_prompt = 0, tokens_completion = 0;
    std::uint64_t calls = 0;
    std::uint64_t unparseable = 0, coin_flips = 0;
    RunResult run;

    ojson metrics() const {
        return {{"instance", id},
                {"completed", completed},
                {"error", error},
                {"final_answer", final_answer ? ojson(*final_answer) : ojson(nullptr)},
                {"correct", correct ? ojson(*correct) : ojson(nullptr)},
                {"rounds", rounds},
                {"comparisons", comparisons},
                {"tokens_prompt", tokens_prompt},
                {"tokens_completion", tokens_completion},
                {"calls", calls},
                {"unparseable_replies", unparseable},
                {"coin_flips", coin_flips}};
    }
};

struct TaskReport {
    ojson config;
    std::vector<InstanceResult> instances;
    std::size_t correct = 0, failed = 0;
    double accuracy = 0; // correct / instances; failed instances count as wrong
    llm::UsageLedger::Totals tokens;
    std::uint64_t calls = 0;
    double cost = 0;
    double wall_seconds = 0;

    ojson metrics() const {
        Stats c;
        std::vector<std::uint64_t> xs;
        for (const auto& i : instances) xs.push_back(i.comparisons);
        c = summarize(xs);
        return {{"instances", instances.size()},
                {"correct", correct},
                {"failed", failed},
                {"accuracy", accuracy},
                {"comparisons_mean", c.mean},
                {"comparisons_stdev", c.stdev},
                {"tokens_prompt", tokens.prompt_tokens},
                {"tokens_completion", tokens.completion_tokens},
                {"calls", calls},
                {"cost", cost}};
    }
};

/// Runs the tree search on every instance, one after another over a shared
/// gateway (replay depends on call order). `transport` overrides HTTP in
/// live and record modes.
inline TaskReport run_task(const TaskRunSpec& spec, std::unique_ptr<llm::Transport> transport = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    auto instances = load_instances(spec.task, spec.dataset, spec.limit, spec.solvable_gate);
    spec.tree.validate();

    llm::GatewayConfig gcfg;
    gcfg.mode = spec.mode;
    gcfg.cassette_path = spec.cassette;
    gcfg.prices = spec.prices;
    gcfg.max_concurrency = spec.max_concurrency;
    if (!transport && spec.mode != llm::GatewayMode::replay) {
        llm::HttpConfig h;
        h.base_url = spec.base_url;
        h.api_key_env = spec.api_key_env;
        transport = std::make_unique<llm::HttpTransport>(h);
    }
    llm::Gateway gw(gcfg, std::move(transport));
    llm::LlmGenerator generator(gw, spec.model);

    TaskReport rep;
    rep.config = spec.to_json();
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
        const auto& inst = instances[idx];
        InstanceResult ir;
        ir.id = inst.id;
        auto cfg = spec.tree;
        cfg.seed = derive_seed(spec.seed, {tag("instance"), idx});
        llm::LlmOracle oracle(gw, spec.task, spec.model, cfg.seed, inst.task->puzzle_size());
        const auto before = gw.ledger().totals();
        const auto calls_before = gw.ledger().calls();
        RunHooks hooks;
        hooks.tokens = [&gw] {
            auto t = gw.ledger().totals();
            return std::pair<std::uint64_t, std::uint64_t>{t.prompt_tokens, t.completion_tokens};
        };
        try {
            ir.run = run(*inst.task, cfg, generator, oracle, hooks);
            ir.completed = true;
        } catch (const RunAborted& e) {
            ir.run = e.partial;
            ir.error = e.what();
        } catch (const std::exception& e) {
            ir.error = e.what();
        }
        const auto after = gw.ledger().totals();
        ir.tokens_prompt = after.prompt_tokens - before.prompt_tokens;
        ir.tokens_completion = after.completion_tokens - before.completion_tokens;
        ir.calls = gw.ledger().calls() - calls_before;
        ir.unparseable = oracle.unparseable_replies();
        ir.coin_flips = oracle.coin_flips();
        ir.rounds = static_cast<int>(ir.run.state.rounds.size());
        for (const auto& r : ir.run.state.rounds) ir.comparisons += r.comparisons;
        ir.final_answer = ir.run.final_answer;
        if (ir.completed && ir.final_answer) ir.correct = inst.task->score(*ir.final_answer);
        else if (ir.completed) ir.correct = false;
        if (!ir.completed) ++rep.failed;
        if (ir.correct.value_or(false)) ++rep.correct;
        rep.instances.push_back(std::move(ir));
    }
    if (spec.mode == llm::GatewayMode::record) gw.save();
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.instances.size());
    rep.tokens = gw.ledger().totals();
    rep.calls = gw.ledger().calls();
    rep.cost = gw.ledger().cost();
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

// ---------------------------------------------------------------- ablation

/// Cartesian sweep over fanout m, K, eviction threshold and vote count n.
/// An empty dimension keeps the base value. pac-sim only takes K and n.
struct AblationSpec {
    std::string target = "tree-sim"; // tree-sim | pac-sim | task-run
    std::vector<int> fanout_m, select_K, n;
    std::vector<std::optional<int>> threshold; // null = no eviction
    TreeSimSpec tree_sim;
    PacSpec pac;
    TaskRunSpec task;

    ojson to_json() const {
        ojson th = ojson::array();
        for (const auto& t : threshold) th.push_back(t ? ojson(*t) : ojson(nullptr));
        ojson j{{"kind", "ablation"}, {"target", target}, {"fanout_m", fanout_m}, {"select_K", select_K},
                {"threshold", th},     {"n", n}};
        if (target == "tree-sim") j["base"] = tree_sim.to_json();
        else if (target == "pac-sim") j["base"] = pac.to_json();
        else j["base"] = task.to_json();
        return j;
    }
    void merge(const nlohmann::json& j) {
        target = j.value("target", target);
        fanout_m = j.value("fanout_m", fanout_m);
        select_K = j.value("select_K", select_K);
        n = j.value("n", n);
        if (j.contains("threshold")) {
            threshold.clear();
            for (const auto& t : j["threshold"]) threshold.push_back(t.is_null() ? std::nullopt : std::optional<int>(t.get<int>()));
        }
        if (j.contains("base")) {
            if (target == "tree-sim") tree_sim.merge(j["base"]);
            else if (target == "pac-sim") pac.merge(j["base"]);
            else if (target == "task-run") task.merge(j["base"]);
        }
        if (target != "tree-sim" && target != "pac-sim" && target != "task-run")
            throw std::invalid_argument("unknown ablation target " + target);
    }
};

struct AblationRow {
    ojson config;  // full effective config of this grid point
    ojson metrics;
    bool failed = false;
    double wall_seconds = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    double wall_seconds = 0;
};

namespace detail {

inline void apply_tree_dims(TreeConfig& t, std::optional<int> m, std::optional<int> K, std::optional<std::optional<int>> th,
                            std::optional<int> n) {
    if (m) t.fanout_m = *m;
    if (K) t.select_K = *K, t.selection.K = static_cast<std::size_t>(*K);
    if (th) t.eviction_threshold = *th;
    if (n) t.selection.n = *n;
}

template <typename T>
std::vector<std::optional<T>> dim(const std::vector<T>& xs) {
    if (xs.empty()) return {std::nullopt};
    return {xs.begin(), xs.end()};
}

} // namespace detail

/// `transport_factory` (optional) supplies a transport per task-run grid point.
inline AblationReport run_ablation(const AblationSpec& spec,
                                   const std::function<std::unique_ptr<llm::Transport>()>& transport_factory = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (spec.target == "pac-sim" && (!spec.fanout_m.empty() || !spec.threshold.empty()))
        throw std::invalid_argument("pac-sim ablation sweeps only K and n");
    AblationReport rep;
    for (auto m : detail::dim(spec.fanout_m))
        for (auto K : detail::dim(spec.select_K))
            for (auto th : detail::dim(spec.threshold))
                for (auto n : detail::dim(spec.n)) {
                    const auto t1 = std::chrono::steady_clock::now();
                    AblationRow row;
                    if (spec.target == "pac-sim") {
                        auto p = spec.pac;
                        if (K) p.selection.K = static_cast<std::size_t>(*K);
                        if (n) p.selection.n = *n;
                        row.config = p.to_json();
                        auto r = run_pac_sim(p);
                        row.metrics = r.metrics();
                    } else if (spec.target == "tree-sim") {
                        auto s = spec.tree_sim;
                        detail::apply_tree_dims(s.tree, m, K, th, n);
                        row.config = s.to_json();
                        auto r = run_tree_sim(s);
                        row.metrics = r.metrics();
                        row.failed = r.invariant_failures > 0;
                    } else {
                        auto s = spec.task;
                        detail::apply_tree_dims(s.tree, m, K, th, n);
                        row.config = s.to_json();
                        auto r = run_task(s, transport_factory ? transport_factory() : nullptr);
                        row.metrics = r.metrics();
                        row.failed = r.failed > 0;
                    }
                    row.wall_seconds = elapsed_seconds(t1);
                    rep.rows.push_back(std::move(row));
                }
    rep.wall_seconds = elapsed_seconds(t0);
    return rep;
}

// ---------------------------------------------------------------- output

/// Nested objects become dotted keys; arrays stay as compact JSON.
inline void flatten(const ojson& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        return;
    }
    if (j.is_null()) out.emplace_back(prefix, "");
    else if (j.is_string()) out.emplace_back(prefix, j.get<std::string>());
    else out.emplace_back(prefix, j.dump());
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

/// One CSV line per (config, metrics) pair; config columns are prefixed
/// "config.". Every row must flatten to the same columns.
inline std::string to_csv(const std::vector<std::pair<ojson, ojson>>& rows) {
    std::string out;
    std::vector<std::string> header;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::pair<std::string, std::string>> cells;
        flatten(rows[r].first, "config", cells);
        flatten(rows[r].second, "", cells);
        std::vector<std::string> names;
        for (const auto& c : cells) names.push_back(c.first);
        if (r == 0) {
            header = names;
            for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + csv_field(header[k]);
            out += "\n";
        } else if (names != header) {
            throw std::logic_error("CSV rows do not share columns");
        }
        for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + csv_field(cells[k].second);
        out += "\n";
    }
    return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + p.string());
}

/// <dir>/<stem>.csv plus the <dir>/<stem>.json sidecar (which alone holds wall time).
inline void write_report(const std::filesystem::path& dir, const std::string& stem,
                         const std::vector<std::pair<ojson, ojson>>& rows, const ojson& sidecar) {
    write_file(dir / (stem + ".csv"), to_csv(rows));
    write_file(dir / (stem + ".json"), sidecar.dump(2) + "\n");
}

} // namespace ctot::harness
