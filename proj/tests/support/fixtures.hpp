#pragma once

#include <filesystem>

#include "ctot/harness.hpp"
#include "support/golden.hpp"

namespace ctot::fixtures {

namespace fs = std::filesystem;

/// A replay fixture directory: config.json, dataset.*, cassette.jsonl,
/// trace.jsonl (all instances, concatenated) and expected.json.
inline harness::TaskRunSpec load_spec(const fs::path& dir) {
    const auto cfg = nlohmann::json::parse(golden::read_text((dir / "config.json").string()));
    auto kind = parse_task_kind(cfg.at("task").get<std::string>());
    if (!kind) throw std::invalid_argument("bad task in fixture config");
    auto spec = harness::TaskRunSpec::for_task(*kind);
    spec.merge(cfg);
    for (const char* name : {"dataset.jsonl", "dataset.csv", "dataset.json"})
        if (fs::exists(dir / name)) spec.dataset = (dir / name).string();
    spec.cassette = (dir / "cassette.jsonl").string();
    spec.mode = llm::GatewayMode::replay;
    return spec;
}

inline std::string all_traces(const harness::TaskReport& r) {
    std::string s;
    for (const auto& i : r.instances) s += i.run.trace_jsonl();
    return s;
}

inline nlohmann::ordered_json expected_of(const harness::TaskReport& r) {
    nlohmann::ordered_json answers = nlohmann::ordered_json::array();
    for (const auto& i : r.instances) answers.push_back(i.final_answer ? nlohmann::ordered_json(*i.final_answer) : nullptr);
    return {{"answers", answers},
            {"accuracy", r.accuracy},
            {"tokens_prompt", r.tokens.prompt_tokens},
            {"tokens_completion", r.tokens.completion_tokens},
            {"calls", r.calls}};
}

} // namespace ctot::fixtures
