#include "maps/sls.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"

namespace maps::sls {

const char* to_string(ThroughputLevel level) {
    switch (level) {
    case ThroughputLevel::low: return "low";
    case ThroughputLevel::medium: return "medium";
    case ThroughputLevel::high: return "high";
    }
    return "low";
}

std::optional<ThroughputLevel> throughput_from_string(std::string_view s) {
    if (s == "low") return ThroughputLevel::low;
    if (s == "medium") return ThroughputLevel::medium;
    if (s == "high") return ThroughputLevel::high;
    return std::nullopt;
}

const char* to_string(IssueKind kind) {
    switch (kind) {
    case IssueKind::missing_field: return "MissingField";
    case IssueKind::bad_enum: return "BadEnum";
    case IssueKind::out_of_range: return "OutOfRange";
    case IssueKind::duplicate_label: return "DuplicateLabel";
    case IssueKind::band_mismatch: return "BandMismatch";
    }
    return "MissingField";
}

Transcript Transcript::from_json(const nlohmann::json& j) {
    Transcript t;
    if (!j.is_object() || !j.contains("utterances") || !j["utterances"].is_array()) {
        throw Error("ParseError", "transcript must be an object with an utterances array");
    }
    for (const auto& u : j["utterances"]) {
        if (!u.is_object() || !u.contains("text") || !u["text"].is_string() ||
            u["text"].get<std::string>().empty()) {
            throw Error("ParseError", "each utterance needs non-empty text");
        }
        Utterance ut;
        ut.text = u["text"].get<std::string>();
        if (u.contains("speaker") && u["speaker"].is_string()) {
            ut.speaker = u["speaker"].get<std::string>();
        }
        t.utterances.push_back(std::move(ut));
    }
    return t;
}

nlohmann::json Transcript::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& u : utterances) {
        nlohmann::json ju;
        ju["speaker"] = u.speaker ? nlohmann::json(*u.speaker) : nlohmann::json(nullptr);
        ju["text"] = u.text;
        arr.push_back(std::move(ju));
    }
    return nlohmann::json{{"utterances", std::move(arr)}};
}

// ---------------------------------------------------------------------------
// Validation

namespace {

struct Collector {
    std::vector<Issue>& errors;

    void missing(const std::string& path, const std::string& detail) {
        errors.push_back({IssueKind::missing_field, path, detail});
    }
    void bad_enum(const std::string& path, const std::string& got) {
        errors.push_back({IssueKind::bad_enum, path, got});
    }
    void range(const std::string& path, const std::string& got) {
        errors.push_back({IssueKind::out_of_range, path, got});
    }
};

// Returns the field if present with the wanted type; records a
// missing_field issue otherwise (wrong type counts as missing, the
// taxonomy has no separate type error).
const nlohmann::json* want(const nlohmann::json& obj, const char* key, const char* type,
                           const std::string& path, Collector& c) {
    if (!obj.contains(key)) {
        c.missing(path + "." + key, "field absent");
        return nullptr;
    }
    const auto& v = obj[key];
    bool ok = (std::string_view(type) == "string" && v.is_string()) ||
              (std::string_view(type) == "number" && v.is_number()) ||
              (std::string_view(type) == "array" && v.is_array());
    if (!ok) {
        c.missing(path + "." + key, std::string("expected ") + type);
        return nullptr;
    }
    return &v;
}

std::optional<double> coord(const nlohmann::json& user, const char* key,
                            const std::string& path, Collector& c, bool& present) {
    present = false;
    if (!user.contains(key) || user[key].is_null()) {
        return std::nullopt;
    }
    if (!user[key].is_number()) {
        c.missing(path + "." + key, "expected number or null");
        return std::nullopt;
    }
    present = true;
    double v = user[key].get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        c.range(path + "." + key, user[key].dump());
        return std::nullopt;
    }
    return v;
}

} // namespace

ValidationResult validate_sls(const nlohmann::json& document, const DemandBands& bands) {
    ValidationResult result;
    Collector c{result.errors};

    if (!document.is_object()) {
        c.missing("$", "document is not an object");
        return result;
    }

    ServiceLevelSpec spec;
    if (const auto* v = want(document, "scenario_id", "string", "$", c)) {
        spec.scenario_id = v->get<std::string>();
    }
    if (const auto* v = want(document, "generated_at", "string", "$", c)) {
        spec.generated_at = v->get<std::string>();
        if (!is_rfc3339(spec.generated_at)) {
            c.range("$.generated_at", spec.generated_at + " (not RFC 3339)");
        }
    }
    if (const auto* v = want(document, "backend_id", "string", "$", c)) {
        spec.backend_id = v->get<std::string>();
    }
    if (const auto* v = want(document, "pipeline_version", "string", "$", c)) {
        spec.pipeline_version = v->get<std::string>();
    }

    const auto* users = want(document, "users", "array", "$", c);
    if (!users) {
        return result;
    }

    std::set<std::string> seen_labels;
    size_t i = 0;
    for (const auto& ju : *users) {
        const std::string path = "$.users[" + std::to_string(i) + "]";
        ++i;
        if (!ju.is_object()) {
            c.missing(path, "user entry is not an object");
            continue;
        }
        PerceivedUser user;

        if (const auto* v = want(ju, "label", "string", path, c)) {
            user.label = v->get<std::string>();
            if (!seen_labels.insert(user.label).second) {
                result.errors.push_back({IssueKind::duplicate_label, path + ".label", user.label});
            }
        }
        if (const auto* v = want(ju, "throughput_level", "string", path, c)) {
            if (auto level = throughput_from_string(v->get<std::string>())) {
                user.throughput_level = *level;
            } else {
                c.bad_enum(path + ".throughput_level", v->get<std::string>());
            }
        }
        if (const auto* v = want(ju, "context", "string", path, c)) {
            user.context = v->get<std::string>();
        }
        if (const auto* v = want(ju, "traffic_demand", "number", path, c)) {
            double d = v->get<double>();
            if (!std::isfinite(d) || d < 0.0) {
                c.range(path + ".traffic_demand", v->dump());
            } else {
                user.traffic_demand = d;
            }
        }

        bool x_present = false, y_present = false;
        auto x = coord(ju, "x", path, c, x_present);
        auto y = coord(ju, "y", path, c, y_present);
        if (x_present != y_present) {
            c.missing(path + (x_present ? ".y" : ".x"), "coordinates must come in pairs");
        } else if (x && y) {
            user.position = RelativePoint{*x, *y};
        }

        if (const auto* v = want(ju, "provenance", "array", path, c)) {
            for (const auto& p : *v) {
                if (!p.is_string()) {
                    c.bad_enum(path + ".provenance", p.dump());
                    continue;
                }
                const auto s = p.get<std::string>();
                if (s == "image") user.provenance.image = true;
                else if (s == "audio") user.provenance.audio = true;
                else c.bad_enum(path + ".provenance", s);
            }
            if (user.provenance.empty() && v->empty()) {
                c.range(path + ".provenance", "provenance must be non-empty");
            }
        }

        if (user.provenance.image_only() && !x_present && !y_present) {
            c.missing(path + ".x", "image-sourced user needs a position");
        }

        // Advisory band check: never an error, the bands are not normative.
        if (user.traffic_demand >= 0) {
            double cap = user.throughput_level == ThroughputLevel::low ? bands.low_max
                       : user.throughput_level == ThroughputLevel::medium ? bands.medium_max
                                                                          : bands.high_max;
            if (user.traffic_demand > cap) {
                result.warnings.push_back(
                    {IssueKind::band_mismatch, path + ".traffic_demand",
                     canonical_number(user.traffic_demand) + " exceeds " +
                         to_string(user.throughput_level) + " band cap " + canonical_number(cap)});
            }
        }

        spec.users.push_back(std::move(user));
    }

    if (result.errors.empty()) {
        result.spec = std::move(spec);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const PerceivedUser& user) {
    nlohmann::json j;
    j["label"] = user.label;
    j["x"] = user.position ? nlohmann::json(user.position->x) : nlohmann::json(nullptr);
    j["y"] = user.position ? nlohmann::json(user.position->y) : nlohmann::json(nullptr);
    j["throughput_level"] = to_string(user.throughput_level);
    j["context"] = user.context;
    j["traffic_demand"] = user.traffic_demand;
    nlohmann::json prov = nlohmann::json::array();
    if (user.provenance.image) prov.push_back("image");
    if (user.provenance.audio) prov.push_back("audio");
    j["provenance"] = std::move(prov);
    return j;
}

nlohmann::json to_json(const ServiceLevelSpec& spec) {
    nlohmann::json j;
    j["scenario_id"] = spec.scenario_id;
    j["generated_at"] = spec.generated_at;
    j["backend_id"] = spec.backend_id;
    j["pipeline_version"] = spec.pipeline_version;
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : spec.users) {
        users.push_back(to_json(u));
    }
    j["users"] = std::move(users);
    return j;
}

std::string serialize_sls(const ServiceLevelSpec& spec) {
    return canonical_dump(to_json(spec), 2) + "\n";
}

bool is_rfc3339(std::string_view s) {
    // YYYY-MM-DDThh:mm:ss[.frac](Z|±hh:mm)
    auto digit = [](char ch) { return ch >= '0' && ch <= '9'; };
    if (s.size() < 20) return false;
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u, 11u, 12u, 14u, 15u, 17u, 18u}) {
        if (!digit(s[i])) return false;
    }
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't') || s[13] != ':' || s[16] != ':') {
        return false;
    }
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    int hour = (s[11] - '0') * 10 + (s[12] - '0');
    int minute = (s[14] - '0') * 10 + (s[15] - '0');
    int sec = (s[17] - '0') * 10 + (s[18] - '0');
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || sec > 60) {
        return false;
    }
    size_t pos = 19;
    if (s[pos] == '.') {
        ++pos;
        size_t frac = 0;
        while (pos < s.size() && digit(s[pos])) { ++pos; ++frac; }
        if (frac == 0) return false;
    }
    if (pos >= s.size()) return false;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        return pos + 1 == s.size();
    }
    if (s[pos] != '+' && s[pos] != '-') return false;
    if (pos + 6 != s.size()) return false;
    return digit(s[pos + 1]) && digit(s[pos + 2]) && s[pos + 3] == ':' &&
           digit(s[pos + 4]) && digit(s[pos + 5]);
}

std::string rfc3339_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace maps::sls
