#include "maps/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdint>

#include "maps/error.hpp"

namespace maps {

std::string canonical_number(double v) {
    if (!std::isfinite(v)) {
        throw Error("NonFinite", "cannot render non-finite number");
    }
    if (v == 0.0) {
        return "0";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    auto dot = s.find('.');
    if (dot != std::string::npos) {
        auto last = s.find_last_not_of('0');
        s.erase(last == dot ? dot : last + 1);
    }
    if (s == "-0") {
        s = "0";
    }
    return s;
}

namespace {

void dump_rec(const nlohmann::json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<size_t>(indent) * (depth + 1), ' ');
    const std::string closing_pad(static_cast<size_t>(indent) * depth, ' ');
    const char* nl = indent > 0 ? "\n" : "";
    const char* kv_sep = indent > 0 ? ": " : ":";

    switch (j.type()) {
    case nlohmann::json::value_t::null:
        out += "null";
        break;
    case nlohmann::json::value_t::boolean:
        out += j.get<bool>() ? "true" : "false";
        break;
    case nlohmann::json::value_t::number_integer:
        out += std::to_string(j.get<std::int64_t>());
        break;
    case nlohmann::json::value_t::number_unsigned:
        out += std::to_string(j.get<std::uint64_t>());
        break;
    case nlohmann::json::value_t::number_float:
        out += canonical_number(j.get<double>());
        break;
    case nlohmann::json::value_t::string:
        out += nlohmann::json(j.get<std::string>()).dump();
        break;
    case nlohmann::json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            break;
        }
        out += "[";
        bool first = true;
        for (const auto& item : j) {
            if (!first) out += ",";
            first = false;
            out += nl;
            out += pad;
            dump_rec(item, indent, depth + 1, out);
        }
        out += nl;
        out += closing_pad;
        out += "]";
        break;
    }
    case nlohmann::json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            break;
        }
        out += "{";
        bool first = true;
        // nlohmann::json objects iterate in sorted key order.
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",";
            first = false;
            out += nl;
            out += pad;
            out += nlohmann::json(it.key()).dump();
            out += kv_sep;
            dump_rec(it.value(), indent, depth + 1, out);
        }
        out += nl;
        out += closing_pad;
        out += "}";
        break;
    }
    default:
        throw Error("NonFinite", "unsupported json value type");
    }
}

} // namespace

std::string canonical_dump(const nlohmann::json& j, int indent) {
    std::string out;
    dump_rec(j, indent, 0, out);
    return out;
}

} // namespace maps
