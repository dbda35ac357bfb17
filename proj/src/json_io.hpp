#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"

namespace maps::detail {

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("MissingPart", "cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) {
        throw Error("ParseError", "invalid JSON in " + path.string());
    }
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("IoError", "cannot open " + path.string() + " for writing");
    }
    out << bytes;
    out.flush();
    if (!out) {
        throw Error("IoError", "short write to " + path.string());
    }
}

inline void write_canonical_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, canonical_dump(j, 2) + "\n");
}

} // namespace maps::detail
