#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctot/tasks/prompts.hpp"

namespace ctot::golden {

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Plain find/replace-all, deliberately unlike the library's single-pass filler.
inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (auto p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) s.replace(p, from.size(), to);
    return s;
}

struct GoldenCase {
    std::string name;
    std::string expected;
    std::string actual;
};

/// Every prompt builder against its golden file. `dir` holds the <stem>.txt files.
inline std::vector<GoldenCase> golden_prompt_cases(const std::string& dir) {
    const std::string a = "2 3 4 (left)", b = "[[1, *], [*, 1]] line\nsecond";
    std::vector<GoldenCase> out;
    const std::pair<TaskKind, std::string> tasks[] = {
        {TaskKind::qa, "qa"}, {TaskKind::game24, "game24"}, {TaskKind::sudoku, "sudoku"}};
    for (const auto& [kind, stem] : tasks) {
        for (int v = 1; v <= 3; ++v) {
            const auto name = stem + "_compare_" + std::to_string(v);
            auto exp = replace_all(replace_all(read_text(dir + "/" + name + ".txt"), "{input_1}", a), "{input_2}", b);
            exp = replace_all(exp, "{puzzle_size}", "4");
            out.push_back({name, exp, build_comparison_prompt(kind, a, b, v, 4)});
        }
    }
    const std::string q = "What is 2+2?\nOptions: A)3 B)4";
    out.push_back({"qa_generate", replace_all(read_text(dir + "/qa_generate.txt"), "{question}", q),
                   qa_generation_prompt(q)});
    out.push_back({"game24_propose", replace_all(read_text(dir + "/game24_propose.txt"), "{input}", "1 5 7 9"),
                   g24_propose_prompt("1 5 7 9")});
    const std::string steps = "4 4 6 8\n    Steps:\n    4 + 8 = 12 (left: 4 6 12)";
    out.push_back({"game24_answer", replace_all(read_text(dir + "/game24_answer.txt"), "{input}", steps),
                   g24_answer_prompt(steps)});
    const std::string grid = "[[1, *, *], [*, 1, *], [*, 2, *]]";
    out.push_back({"sudoku_generate",
                   replace_all(replace_all(read_text(dir + "/sudoku_generate.txt"), "{puzzle_size}", "3"), "{question}",
                               grid),
                   sudoku_generation_prompt(3, grid)});
    return out;
}

} // namespace ctot::golden
