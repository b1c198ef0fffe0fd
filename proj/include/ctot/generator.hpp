#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctot/tasks/adapter.hpp"
#include "ctot/thought.hpp"

namespace ctot {

struct GenerationRequest {
    const TaskAdapter& task;
    const Thought* parent; // null for the first round
    int round;
    std::size_t parent_index;
    int fanout;
};

/// Source of new step texts; the orchestrator wraps them into thoughts.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::vector<std::string> generate(const GenerationRequest& req) = 0;
};

/// Generator driven by a caller-supplied function; used for simulations and tests.
class ScriptedGenerator final : public Generator {
public:
    using Script = std::function<std::vector<std::string>(const GenerationRequest&)>;
    explicit ScriptedGenerator(Script script) : script_(std::move(script)) {}
    std::vector<std::string> generate(const GenerationRequest& req) override { return script_(req); }

private:
    Script script_;
};

} // namespace ctot
