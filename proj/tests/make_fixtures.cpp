// Re-records the replay fixtures under tests/data/replay with the scripted model.
// Usage: make_fixtures <fixture dir>...

#include <iostream>

#include "support/fake_llm.hpp"
#include "support/fixtures.hpp"

using namespace ctot;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fixtures <fixture dir>...\n";
        return 2;
    }
    for (int a = 1; a < argc; ++a) {
        const std::filesystem::path dir = argv[a];
        auto spec = fixtures::load_spec(dir);
        std::filesystem::remove(spec.cassette);
        spec.mode = llm::GatewayMode::record;
        auto report = harness::run_task(spec, std::make_unique<fake::ScriptedLlm>());
        harness::write_file(dir / "trace.jsonl", fixtures::all_traces(report));
        harness::write_file(dir / "expected.json", fixtures::expected_of(report).dump(2) + "\n");
        std::cout << dir.string() << ": " << report.calls << " calls, accuracy " << report.accuracy << ", failed "
                  << report.failed << "\n";
        for (const auto& i : report.instances)
            if (!i.error.empty()) std::cout << "  " << i.id << ": " << i.error << "\n";
    }
}
