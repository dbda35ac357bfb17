#include "maps/agents.hpp"

#include <chrono>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "maps/schema.hpp"

namespace maps::agents {

namespace {

nlohmann::json user_properties(bool with_provenance) {
    nlohmann::json props{
        {"label", {{"type", "string"}}},
        {"x", {{"type", {"number", "null"}}}},
        {"y", {{"type", {"number", "null"}}}},
        {"throughput_level", {{"type", "string"}, {"enum", {"low", "medium", "high"}}}},
        {"context", {{"type", "string"}}},
        {"traffic_demand", {{"type", "number"}, {"minimum", 0}}},
    };
    if (with_provenance) {
        props["provenance"] = {{"type", "array"},
                               {"items", {{"type", "string"}, {"enum", {"image", "audio"}}}}};
    }
    return props;
}

OutputSchema make_schema(const std::string& name, bool with_provenance) {
    nlohmann::json required = {"label", "throughput_level", "context", "traffic_demand"};
    if (with_provenance) {
        required.push_back("provenance");
    }
    nlohmann::json user_schema{
        {"type", "object"}, {"required", required}, {"properties", user_properties(with_provenance)}};
    nlohmann::json schema{
        {"type", "object"},
        {"required", {"users"}},
        {"properties", {{"users", {{"type", "array"}, {"items", user_schema}}}}}};
    return {name, schema};
}

std::string truncate_tree(const nlohmann::json& tree) {
    std::string dump = tree.dump();
    if (dump.size() > 600) {
        dump.resize(600);
        dump += "...";
    }
    return dump;
}

[[noreturn]] void schema_violation(const std::string& what, const nlohmann::json& tree) {
    throw Error("SchemaViolation", what + "; offending tree: " + truncate_tree(tree));
}

} // namespace

const OutputSchema& image_agent_schema() {
    static const OutputSchema s = make_schema("image_agent", false);
    return s;
}

const OutputSchema& audio_agent_schema() {
    static const OutputSchema s = make_schema("audio_agent", false);
    return s;
}

const OutputSchema& fusion_agent_schema() {
    static const OutputSchema s = make_schema("fusion_agent", true);
    return s;
}

const Attachment* find_attachment(const std::vector<Attachment>& attachments,
                                  const std::string& kind) {
    for (const auto& a : attachments) {
        if (a.kind == kind) return &a;
    }
    return nullptr;
}

PromptBundle build_image_prompt(const perception::DetectionReport& report) {
    PromptBundle bundle;
    std::string& text = bundle.text;
    text += "You are a human operator interpreting UAV imagery during an emergency "
            "communications deployment.\n";
    text += "Frame " + report.frame_id + " (" + canonical_number(report.frame_width) + "x" +
            canonical_number(report.frame_height) + " px) was processed by an object detector.\n";
    if (report.entries.empty()) {
        text += "The detector reported no objects in this frame.\n";
    } else {
        text += "Detector report:\n" + canonical_dump(report.to_json()) + "\n";
    }
    text += "For each detected object that represents a network user, output one user entry:\n"
            "- label: the object tag from the report (for example obj_1)\n"
            "- x, y: the relative center coordinates copied from the report\n"
            "- throughput_level: low, medium or high\n"
            "- traffic_demand: estimated demand in Mbit/s\n"
            "- context: a one-sentence justification grounded in the scene\n"
            "Respond only with JSON conforming to the requested schema. An empty users list "
            "is acceptable when nothing user-bearing is visible.\n";

    bundle.attachments.push_back(
        {"detection_report", "", canonical_dump(report.to_json())});
    if (!report.frame_id.empty()) {
        bundle.attachments.push_back({"frame", report.frame_id, ""});
    }
    return bundle;
}

PromptBundle build_audio_prompt(const sls::Transcript& transcript) {
    PromptBundle bundle;
    std::string& text = bundle.text;
    text += "You are analysing transcribed radio traffic captured during an emergency "
            "operation. Extract the intent, urgency and data needs of each speaking user.\n";
    if (transcript.utterances.empty()) {
        text += "No audio is available for this cycle.\n";
    } else {
        text += "Utterances:\n";
        size_t n = 1;
        for (const auto& u : transcript.utterances) {
            text += std::to_string(n++) + ". [" + (u.speaker ? *u.speaker : "unattributed") +
                    "] " + u.text + "\n";
        }
    }
    text += "For each distinct speaker, output one user entry with throughput_level "
            "(low, medium or high), traffic_demand in Mbit/s, x and y set to the spoken "
            "position when one is stated and null otherwise, and a context sentence "
            "explaining the inferred need. Respond only with JSON conforming to the "
            "requested schema.\n";

    bundle.attachments.push_back({"transcript", "", canonical_dump(transcript.to_json())});
    return bundle;
}

namespace {

struct ParsedUser {
    sls::PerceivedUser user;
    bool has_position = false;
};

ParsedUser parse_one_user(const nlohmann::json& ju, const nlohmann::json& whole) {
    ParsedUser out;
    auto& user = out.user;
    user.label = ju["label"].get<std::string>();
    user.context = ju["context"].get<std::string>();
    user.traffic_demand = ju["traffic_demand"].get<double>();
    user.throughput_level = *sls::throughput_from_string(ju["throughput_level"].get<std::string>());

    const bool has_x = ju.contains("x") && !ju["x"].is_null();
    const bool has_y = ju.contains("y") && !ju["y"].is_null();
    if (has_x != has_y) {
        schema_violation("user " + user.label + " has a dangling coordinate", whole);
    }
    if (has_x && has_y) {
        sls::RelativePoint p{ju["x"].get<double>(), ju["y"].get<double>()};
        if (!p.in_unit_square()) {
            schema_violation("user " + user.label + " position outside the unit square", whole);
        }
        user.position = p;
        out.has_position = true;
    }
    return out;
}

} // namespace

std::vector<sls::PerceivedUser> parse_fragment_users(const nlohmann::json& tree,
                                                     const std::string& source) {
    const OutputSchema& os = source == "image" ? image_agent_schema() : audio_agent_schema();
    auto problems = schema::check(tree, os.schema);
    if (!problems.empty()) {
        schema_violation(problems.front(), tree);
    }
    std::vector<sls::PerceivedUser> users;
    for (const auto& ju : tree["users"]) {
        auto parsed = parse_one_user(ju, tree);
        if (source == "image" && !parsed.has_position) {
            schema_violation("image user " + parsed.user.label + " lacks a position", tree);
        }
        parsed.user.provenance.image = source == "image";
        parsed.user.provenance.audio = source == "audio";
        users.push_back(std::move(parsed.user));
    }
    return users;
}

std::vector<sls::PerceivedUser> parse_fused_users(const nlohmann::json& tree) {
    auto problems = schema::check(tree, fusion_agent_schema().schema);
    if (!problems.empty()) {
        schema_violation(problems.front(), tree);
    }
    std::vector<sls::PerceivedUser> users;
    for (const auto& ju : tree["users"]) {
        auto parsed = parse_one_user(ju, tree);
        for (const auto& p : ju["provenance"]) {
            if (p == "image") parsed.user.provenance.image = true;
            if (p == "audio") parsed.user.provenance.audio = true;
        }
        if (parsed.user.provenance.empty()) {
            schema_violation("fused user " + parsed.user.label + " has empty provenance", tree);
        }
        users.push_back(std::move(parsed.user));
    }
    return users;
}

AgentFragment run_image_agent(const perception::DetectionReport& report, ModelBackend& backend) {
    auto bundle = build_image_prompt(report);
    auto result = backend.generate_structured(bundle.text, bundle.attachments, image_agent_schema());
    auto users = parse_fragment_users(result.tree, "image");
    for (const auto& user : users) {
        bool known = false;
        for (const auto& e : report.entries) {
            if (e.tag == user.label) { known = true; break; }
        }
        if (!known) {
            schema_violation("image user label " + user.label + " not in the detection report",
                             result.tree);
        }
    }
    return {"image", std::move(users), result.latency_s};
}

AgentFragment run_audio_agent(const sls::Transcript& transcript, ModelBackend& backend) {
    auto bundle = build_audio_prompt(transcript);
    auto result = backend.generate_structured(bundle.text, bundle.attachments, audio_agent_schema());
    return {"audio", parse_fragment_users(result.tree, "audio"), result.latency_s};
}

} // namespace maps::agents
