#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctot/tasks/adapter.hpp"

namespace ctot {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One benchmark item with the adapter that scores it.
struct Instance {
    std::string id;
    std::shared_ptr<const TaskAdapter> task;
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// RFC 4180 style: quoted fields with "" escapes; CRLF tolerated.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows(1);
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            rows.back().push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) rows.back().push_back(std::move(field));
            field.clear();
            any = false;
            rows.emplace_back();
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw DatasetError("unterminated quoted CSV field");
    if (any || !field.empty()) rows.back().push_back(std::move(field));
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
    return rows;
}

} // namespace detail

/// AQuA-style JSONL: {"question": str, "options": [str], "correct": "A".."E"}.
inline std::vector<Instance> load_aqua_jsonl(const std::string& path, std::size_t limit = 0) {
    std::vector<Instance> out;
    std::istringstream in(detail::read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("question") || !j["question"].is_string() || !j.contains("options") ||
            !j["options"].is_array() || !j.contains("correct") || !j["correct"].is_string())
            throw DatasetError(path + ":" + std::to_string(lineno) + ": expected question, options[] and correct");
        const auto correct = j["correct"].get<std::string>();
        if (correct.size() != 1 || correct[0] < 'A' || correct[0] > 'E')
            throw DatasetError(path + ":" + std::to_string(lineno) + ": correct must be one of A-E");
        std::string q = j["question"].get<std::string>() + "\nOptions:";
        for (const auto& o : j["options"]) {
            if (!o.is_string()) throw DatasetError(path + ":" + std::to_string(lineno) + ": options must be strings");
            q += " " + o.get<std::string>();
        }
        out.push_back({"qa-" + std::to_string(out.size()), std::make_shared<QaTask>(std::move(q), correct[0])});
        if (limit && out.size() == limit) break;
    }
    return out;
}

/// CSV with a "Puzzles" column of four space-separated numbers.
inline std::vector<Instance> load_game24_csv(const std::string& path, std::size_t limit = 0,
                                             Game24Options opt = {}) {
    auto rows = detail::parse_csv(detail::read_file(path));
    if (rows.empty()) throw DatasetError(path + ": empty CSV");
    const auto& header = rows.front();
    auto col = std::find(header.begin(), header.end(), "Puzzles");
    if (col == header.end()) throw DatasetError(path + ": missing Puzzles column");
    const auto k = static_cast<std::size_t>(col - header.begin());
    std::vector<Instance> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() <= k) throw DatasetError(path + ": row " + std::to_string(r + 1) + " is short");
        auto numbers = parse_numbers(rows[r][k]);
        if (numbers.size() != 4)
            throw DatasetError(path + ": row " + std::to_string(r + 1) + ": expected 4 numbers, got '" + rows[r][k] + "'");
        out.push_back({"game24-" + std::to_string(out.size()), std::make_shared<Game24Task>(std::move(numbers), opt)});
        if (limit && out.size() == limit) break;
    }
    return out;
}

/// JSON array (or JSONL) of {"size": N, "givens": [[1, "*", ...], ...]};
/// unfilled cells are "*", 0 or null.
inline std::vector<Instance> load_sudoku_json(const std::string& path, std::size_t limit = 0) {
    const auto text = detail::read_file(path);
    std::vector<nlohmann::json> docs;
    try {
        auto j = nlohmann::json::parse(text);
        if (j.is_array()) docs.assign(j.begin(), j.end());
        else docs.push_back(std::move(j));
    } catch (const nlohmann::json::parse_error&) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!trim(line).empty()) {
                try {
                    docs.push_back(nlohmann::json::parse(line));
                } catch (const nlohmann::json::exception& e) {
                    throw DatasetError(path + ": " + e.what());
                }
            }
    }
    std::vector<Instance> out;
    for (const auto& d : docs) {
        const auto where = path + ": puzzle " + std::to_string(out.size());
        if (!d.is_object() || !d.contains("size") || !d["size"].is_number_integer() || !d.contains("givens") ||
            !d["givens"].is_array())
            throw DatasetError(where + ": expected {\"size\", \"givens\"}");
        const int n = d["size"].get<int>();
        if (n < 1 || n > kMaxSudokuSize) throw DatasetError(where + ": size out of range");
        SudokuGrid g;
        g.size = n;
        if (static_cast<int>(d["givens"].size()) != n) throw DatasetError(where + ": wrong number of rows");
        for (const auto& row : d["givens"]) {
            if (!row.is_array() || static_cast<int>(row.size()) != n) throw DatasetError(where + ": wrong row length");
            for (const auto& cell : row) {
                int v = 0;
                if (cell.is_number_integer()) v = cell.get<int>();
                else if (cell.is_null() || (cell.is_string() && cell.get<std::string>() == "*")) v = 0;
                else throw DatasetError(where + ": bad cell " + cell.dump());
                if (v < 0 || v > n) throw DatasetError(where + ": digit out of range");
                g.cells.push_back(v);
                g.givens.push_back(v != 0);
            }
        }
        if (!sudoku_check(g, g).consistent) throw DatasetError(where + ": givens repeat a digit");
        out.push_back({"sudoku-" + std::to_string(out.size()), std::make_shared<SudokuTask>(std::move(g))});
        if (limit && out.size() == limit) break;
    }
    return out;
}

} // namespace ctot
