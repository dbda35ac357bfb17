#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace maps::sls {

// ---------------------------------------------------------------------------
// Domain types. All immutable values after construction; operations are pure.

enum class ThroughputLevel { low, medium, high };

const char* to_string(ThroughputLevel level);
std::optional<ThroughputLevel> throughput_from_string(std::string_view s);
inline int rank(ThroughputLevel l) { return static_cast<int>(l); }

// Pixel box, origin top-left. Valid iff x_min < x_max, y_min < y_max and all >= 0.
struct BoundingBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    bool valid() const {
        return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max;
    }
};

struct Detection {
    std::string category;   // detector vocabulary label, non-empty
    double confidence = 0;  // in [0,1]
    BoundingBox box;
};

// Dimensionless fractions of frame width/height, origin top-left,
// x rightward, y downward.
struct RelativePoint {
    double x = 0, y = 0;
    bool in_unit_square() const { return x >= 0 && x <= 1 && y >= 0 && y <= 1; }
};

struct ProvenanceSet {
    bool image = false;
    bool audio = false;

    bool empty() const { return !image && !audio; }
    bool image_only() const { return image && !audio; }
    bool operator==(const ProvenanceSet&) const = default;
};

struct PerceivedUser {
    std::string label;
    std::optional<RelativePoint> position; // audio-only users may lack one
    ThroughputLevel throughput_level = ThroughputLevel::low;
    std::string context;
    double traffic_demand = 0; // Mbit/s, >= 0
    ProvenanceSet provenance;
};

struct ServiceLevelSpec {
    std::string scenario_id;
    std::string generated_at; // RFC 3339
    std::vector<PerceivedUser> users;
    std::string backend_id;
    std::string pipeline_version;
};

struct Transcript {
    struct Utterance {
        std::optional<std::string> speaker;
        std::string text; // non-empty
    };
    std::vector<Utterance> utterances; // may be empty

    static Transcript from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Validation

enum class IssueKind {
    missing_field,   // absent, or present with an unusable JSON type
    bad_enum,
    out_of_range,
    duplicate_label,
    band_mismatch,   // warning only: demand inconsistent with level band
};

const char* to_string(IssueKind kind);

struct Issue {
    IssueKind kind;
    std::string path; // "$.users[3].x"
    std::string detail;
};

// Advisory demand/level consistency bands; violations warn, never fail.
struct DemandBands {
    double low_max = 1.0;
    double medium_max = 10.0;
    double high_max = 50.0;
};

struct ValidationResult {
    std::optional<ServiceLevelSpec> spec;
    std::vector<Issue> errors;
    std::vector<Issue> warnings;

    bool ok() const { return errors.empty(); }
};

// Checks every schema field, enum membership, coordinate ranges, demand
// non-negativity and label uniqueness over a parsed document tree; returns
// the typed spec iff no errors. Unknown extra fields are ignored.
ValidationResult validate_sls(const nlohmann::json& document, const DemandBands& bands = {});

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const PerceivedUser& user);
nlohmann::json to_json(const ServiceLevelSpec& spec);

// Canonical byte form: keys sorted, numbers quantized to at most 6 fractional
// digits without trailing zeros, 2-space indent, trailing newline. A valid
// spec round-trips: validate_sls(parse(serialize_sls(s))) == s field for
// field, provided its numbers carry no more than 6 fractional digits.
std::string serialize_sls(const ServiceLevelSpec& spec);

bool is_rfc3339(std::string_view s);
std::string rfc3339_utc_now();

} // namespace maps::sls
