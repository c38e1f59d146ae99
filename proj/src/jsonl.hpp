#pragma once

// Line-delimited JSON helpers shared by the dataset, score and prediction readers.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>

#include <json.hpp>

#include "disagree/error.hpp"

namespace disagree::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Calls `fn(record, line_number)` for each non-blank line. Each line must
/// hold one JSON object.
template <class Fn>
void for_each_record(std::istream& in, const std::string& source, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            throw ParseError(source, line_no, "CR line ending; expected LF");
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
        }
        if (!record.is_object()) {
            throw ParseError(source, line_no, "record is not an object");
        }
        fn(record, line_no);
    }
}

inline std::ifstream open_input(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError(file.string(), 0, "cannot open file");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

/// Shortest round-trip decimal rendering, as used in every emitted file.
inline std::string format_real(double v) { return json(v).dump(); }

}  // namespace disagree::detail
