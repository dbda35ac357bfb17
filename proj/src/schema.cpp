#include "maps/schema.hpp"

namespace maps::schema {

namespace {

const char* type_name(const nlohmann::json& v) {
    switch (v.type()) {
    case nlohmann::json::value_t::null: return "null";
    case nlohmann::json::value_t::boolean: return "boolean";
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned: return "integer";
    case nlohmann::json::value_t::number_float: return "number";
    case nlohmann::json::value_t::string: return "string";
    case nlohmann::json::value_t::array: return "array";
    case nlohmann::json::value_t::object: return "object";
    default: return "unknown";
    }
}

bool matches_type(const nlohmann::json& v, const std::string& t) {
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "array") return v.is_array();
    if (t == "object") return v.is_object();
    if (t == "null") return v.is_null();
    return false;
}

void check_rec(const nlohmann::json& value, const nlohmann::json& schema,
               const std::string& path, std::vector<std::string>& problems) {
    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        std::string expected;
        if (t.is_array()) {
            for (const auto& alt : t) {
                if (matches_type(value, alt.get<std::string>())) { ok = true; break; }
                if (!expected.empty()) expected += "|";
                expected += alt.get<std::string>();
            }
        } else {
            expected = t.get<std::string>();
            ok = matches_type(value, expected);
        }
        if (!ok) {
            problems.push_back(path + ": expected " + expected + ", got " + type_name(value));
            return;
        }
    }
    if (value.is_null()) {
        return; // a permitted null satisfies nothing further
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& e : schema["enum"]) {
            if (e == value) { hit = true; break; }
        }
        if (!hit) {
            problems.push_back(path + ": value " + value.dump() + " not in enum");
        }
    }
    if (value.is_number()) {
        double d = value.get<double>();
        if (schema.contains("minimum") && d < schema["minimum"].get<double>()) {
            problems.push_back(path + ": " + std::to_string(d) + " below minimum");
        }
        if (schema.contains("maximum") && d > schema["maximum"].get<double>()) {
            problems.push_back(path + ": " + std::to_string(d) + " above maximum");
        }
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& req : schema["required"]) {
                if (!value.contains(req.get<std::string>())) {
                    problems.push_back(path + "." + req.get<std::string>() + ": required field missing");
                }
            }
        }
        if (schema.contains("properties")) {
            for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
                if (value.contains(it.key())) {
                    check_rec(value[it.key()], it.value(), path + "." + it.key(), problems);
                }
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        size_t i = 0;
        for (const auto& item : value) {
            check_rec(item, schema["items"], path + "[" + std::to_string(i) + "]", problems);
            ++i;
        }
    }
}

} // namespace

std::vector<std::string> check(const nlohmann::json& value, const nlohmann::json& schema,
                               const std::string& path) {
    std::vector<std::string> problems;
    check_rec(value, schema, path, problems);
    return problems;
}

bool conforms(const nlohmann::json& value, const nlohmann::json& schema) {
    return check(value, schema).empty();
}

} // namespace maps::schema
