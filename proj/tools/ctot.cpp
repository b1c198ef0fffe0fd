// ctot: simulations, task runs, ablations and cassette replay.
//
//   ctot sim pac|complexity|retention [--config f] [--seed n] [--trials n] [--workers n] [--out dir]
//   ctot run <qa|game24|sudoku> --data f [--limit n] [--mode live|record|replay] [--cassette f] ...
//   ctot replay <task> --data f --cassette f [--expect trace.jsonl]
//   ctot ablate --config f [--out dir]
//
// Exit status: 0 when every check passed, 1 when a check failed, 2 on usage
// or input errors, 3 when a simulated model was refused.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "ctot/harness.hpp"

using namespace ctot;
using namespace ctot::harness;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    int workers = 1;
    std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c, bool with_trials = true) {
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed");
    if (with_trials) cmd->add_option("--trials", c.trials, "number of trials")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", c.workers, "parallel workers")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "output directory");
}

nlohmann::json read_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

const char* verdict(bool ok) { return ok ? "ok" : "FAIL"; }

int sim_pac(const Common& c) {
    PacSpec s;
    s.merge(read_config(c.config));
    if (c.seed) s.seed = *c.seed;
    if (c.trials) s.trials = *c.trials;
    s.workers = c.workers;
    const auto r = run_pac_sim(s);
    const double floor = pac_floor(s.selection.delta, s.trials);
    const bool ok = r.success_rate >= floor;
    std::cout << "pac-sim: |Z|=" << s.model.build().size() << " mode=" << to_string(s.selection.mode)
              << " eps=" << s.selection.epsilon << " delta=" << s.selection.delta << " trials=" << s.trials << "\n"
              << "  success rate " << fmt("%.4f", r.success_rate) << " (floor " << fmt("%.2f", floor) << ") "
              << verdict(ok) << "\n"
              << "  comparisons mean " << fmt("%.1f", r.comparisons.mean) << " sd " << fmt("%.1f", r.comparisons.stdev)
              << " max " << r.comparisons.max << "\n";
    ojson side{{"spec", r.config}, {"workers", s.workers}, {"metrics", r.metrics()}, {"floor", floor},
               {"passed", ok}, {"wall_seconds", r.wall_seconds}};
    write_report(c.out, "pac", {{r.config, r.metrics()}}, side);
    return ok ? 0 : 1;
}

int sim_complexity(const Common& c) {
    ComplexitySpec s;
    s.merge(read_config(c.config));
    if (c.seed) s.seed = *c.seed;
    if (c.trials) s.trials = *c.trials;
    s.workers = c.workers;
    const auto r = run_complexity_sim(s);
    std::vector<std::pair<ojson, ojson>> rows;
    for (const auto& p : r.points) {
        std::cout << "  " << p.sweep << " |Z|=" << p.size << " eps=" << p.epsilon << ": mean comparisons "
                  << fmt("%.1f", p.report.comparisons.mean) << "\n";
        rows.emplace_back(p.report.config, p.report.metrics());
    }
    bool ok = true;
    ojson ratios = ojson::array();
    for (const auto& q : r.ratios) {
        std::optional<std::pair<double, double>> band;
        if (q.sweep == "size" && q.to == 2 * q.from) band = {1.0, 2.5};
        if (q.sweep == "epsilon" && q.to * 2 == q.from) band = {2.5, 6.0};
        const bool in = !band || (q.ratio >= band->first && q.ratio <= band->second);
        ok = ok && in;
        std::cout << "  ratio " << q.sweep << " " << q.from << " -> " << q.to << ": " << fmt("%.3f", q.ratio);
        if (band) std::cout << " in [" << band->first << ", " << band->second << "] " << verdict(in);
        std::cout << "\n";
        ratios.push_back({{"sweep", q.sweep}, {"from", q.from}, {"to", q.to}, {"ratio", q.ratio}, {"ok", in}});
    }
    ojson side{{"spec", r.config}, {"ratios", ratios}, {"passed", ok}, {"wall_seconds", r.wall_seconds}};
    write_report(c.out, "complexity", rows, side);
    return ok ? 0 : 1;
}

int sim_retention(const Common& c) {
    RetentionSpec s;
    s.merge(read_config(c.config));
    if (c.seed) s.seed = *c.seed;
    if (c.trials) s.trials = *c.trials;
    s.workers = c.workers;
    const auto r = run_retention_sim(s);
    std::vector<std::pair<ojson, ojson>> rows;
    for (std::size_t l = 0; l < r.layer_rate.size(); ++l) {
        std::cout << "  layer " << l + 1 << ": eps-max retained " << fmt("%.4f", r.layer_rate[l])
                  << ", of everything seen " << fmt("%.4f", r.cumulative_rate[l]) << "\n";
        rows.emplace_back(r.config, ojson{{"layer", l + 1},
                                          {"layer_rate", r.layer_rate[l]},
                                          {"cumulative_rate", r.cumulative_rate[l]}});
    }
    write_report(c.out, "retention", rows, {{"spec", r.config}, {"wall_seconds", r.wall_seconds}});
    return 0;
}

struct RunOptions {
    std::string task;
    std::string data;
    std::size_t limit = 0;
    std::string mode = "replay";
    std::string cassette;
    std::string expect;
};

TaskRunSpec task_spec(const Common& c, const RunOptions& o) {
    auto kind = parse_task_kind(o.task);
    if (!kind) throw CLI::ValidationError("task", "unknown task " + o.task);
    auto s = TaskRunSpec::for_task(*kind);
    s.merge(read_config(c.config));
    if (!o.data.empty()) s.dataset = o.data;
    if (o.limit) s.limit = o.limit;
    if (!o.cassette.empty()) s.cassette = o.cassette;
    s.mode = llm::parse_gateway_mode(o.mode);
    if (c.seed) s.seed = *c.seed;
    if (s.dataset.empty()) throw CLI::ValidationError("--data", "a dataset is required");
    if (s.mode != llm::GatewayMode::live && s.cassette.empty())
        throw CLI::ValidationError("--cassette", "record and replay modes need a cassette");
    return s;
}

int run_cmd(const Common& c, const RunOptions& o) {
    const auto spec = task_spec(c, o);
    const auto r = run_task(spec);
    std::vector<std::pair<ojson, ojson>> rows;
    std::string traces;
    for (const auto& i : r.instances) {
        std::cout << "  " << i.id << ": " << (i.completed ? (i.correct.value_or(false) ? "correct" : "wrong") : "FAILED")
                  << "  answer=" << i.final_answer.value_or("-") << "  rounds=" << i.rounds
                  << "  comparisons=" << i.comparisons << "  tokens=" << i.tokens_prompt << "/" << i.tokens_completion;
        if (!i.error.empty()) std::cout << "  error: " << i.error;
        std::cout << "\n";
        rows.emplace_back(r.config, i.metrics());
        write_file(fs::path(c.out) / "traces" / (i.id + ".jsonl"), i.run.trace_jsonl());
        traces += i.run.trace_jsonl();
    }
    std::cout << "accuracy " << r.correct << "/" << r.instances.size() << " (" << fmt("%.4f", r.accuracy)
              << "), failed " << r.failed << ", tokens " << r.tokens.prompt_tokens << "/" << r.tokens.completion_tokens
              << ", calls " << r.calls << ", cost " << fmt("%.6f", r.cost) << "\n";
    write_report(c.out, "run", rows, {{"spec", r.config}, {"summary", r.metrics()}, {"wall_seconds", r.wall_seconds}});
    write_file(fs::path(c.out) / "summary.csv", to_csv({{r.config, r.metrics()}}));
    bool ok = r.failed == 0;
    if (!o.expect.empty()) {
        std::ifstream in(o.expect, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + o.expect);
        std::string want((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const bool same = want == traces;
        std::cout << "trace matches " << o.expect << ": " << (same ? "yes" : "NO") << "\n";
        ok = ok && same;
    }
    return ok ? 0 : 1;
}

int ablate_cmd(const Common& c) {
    AblationSpec s;
    s.merge(read_config(c.config));
    if (c.seed) s.tree_sim.seed = s.pac.seed = s.task.seed = *c.seed;
    s.tree_sim.workers = s.pac.workers = c.workers;
    const auto r = run_ablation(s);
    std::vector<std::pair<ojson, ojson>> rows;
    ojson walls = ojson::array();
    bool ok = true;
    for (const auto& row : r.rows) {
        std::cout << "  " << row.metrics.dump() << (row.failed ? "  FAILED" : "") << "\n";
        rows.emplace_back(row.config, row.metrics);
        walls.push_back(row.wall_seconds);
        ok = ok && !row.failed;
    }
    write_report(c.out, "ablation", rows, {{"spec", s.to_json()}, {"row_wall_seconds", walls}, {"wall_seconds", r.wall_seconds}});
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"comparison-based tree search: simulations, task runs and ablations"};
    app.require_subcommand(1);

    Common common;
    auto* sim = app.add_subcommand("sim", "preference-model simulations");
    sim->require_subcommand(1);
    auto* pac = sim->add_subcommand("pac", "epsilon-maximum success rate of dueling selection");
    auto* cx = sim->add_subcommand("complexity", "comparison counts across |Z| and epsilon");
    auto* ret = sim->add_subcommand("retention", "per-layer epsilon-maximum retention over stacked selections");
    for (auto* s : {pac, cx, ret}) add_common(s, common);

    RunOptions ro;
    auto* runc = app.add_subcommand("run", "tree search over a dataset");
    auto* replay = app.add_subcommand("replay", "re-run a dataset from a recorded cassette");
    for (auto* s : {runc, replay}) {
        s->add_option("task", ro.task, "qa, game24 or sudoku")->required();
        s->add_option("--data", ro.data, "dataset file");
        s->add_option("--limit", ro.limit, "first N instances only");
        s->add_option("--cassette", ro.cassette, "cassette file (record/replay)");
        add_common(s, common, false);
    }
    runc->add_option("--mode", ro.mode, "live, record or replay")->check(CLI::IsMember({"live", "record", "replay"}));
    replay->add_option("--expect", ro.expect, "expected trace JSONL")->check(CLI::ExistingFile);

    auto* ablate = app.add_subcommand("ablate", "Cartesian sweep over m, K, eviction threshold and n");
    add_common(ablate, common, false);

    CLI11_PARSE(app, argc, argv);
    try {
        if (pac->parsed()) return sim_pac(common);
        if (cx->parsed()) return sim_complexity(common);
        if (ret->parsed()) return sim_retention(common);
        if (runc->parsed()) return run_cmd(common, ro);
        if (replay->parsed()) {
            ro.mode = "replay";
            return run_cmd(common, ro);
        }
        if (ablate->parsed()) return ablate_cmd(common);
    } catch (const ModelRejected& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 3;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
