#include <algorithm>
#include <cctype>
#include <chrono>
#include <regex>
#include <thread>

#include "maps/agents.hpp"
#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "maps/fusion.hpp"

namespace maps::agents {

namespace {

sls::ThroughputLevel parse_level(const nlohmann::json& v) {
    const std::string s = v.get<std::string>();
    auto level = sls::throughput_from_string(s);
    if (!level) throw Error("ConfigError", "unknown throughput level '" + s + "'");
    return *level;
}

std::string lower(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

nlohmann::json parse_inline(const std::vector<Attachment>& attachments,
                            const std::string& kind) {
    const Attachment* a = find_attachment(attachments, kind);
    if (!a) throw Error("MissingPart", "no '" + kind + "' attachment in the request");
    auto tree = nlohmann::json::parse(a->inline_content, nullptr, false);
    if (tree.is_discarded()) {
        throw Error("ParseError", "attachment '" + kind + "' is not valid JSON");
    }
    return tree;
}

nlohmann::json apply_malformation(nlohmann::json tree, const std::string& mode) {
    if (mode.empty()) return tree;
    if (mode == "not_object") return nlohmann::json::array({"malformed"});
    auto& users = tree["users"];
    if (mode.rfind("drop_field:", 0) == 0) {
        const std::string field = mode.substr(std::string("drop_field:").size());
        if (!users.empty()) users[0].erase(field);
        return tree;
    }
    if (mode == "bad_enum:throughput_level") {
        if (!users.empty()) users[0]["throughput_level"] = "extreme";
        return tree;
    }
    if (mode == "negative_demand") {
        if (!users.empty()) users[0]["traffic_demand"] = -1.0;
        return tree;
    }
    if (mode == "duplicate_label") {
        if (users.size() >= 2) {
            users[1]["label"] = users[0]["label"];
        } else if (users.size() == 1) {
            users.push_back(users[0]);
        }
        return tree;
    }
    throw Error("ConfigError", "unknown malformation mode '" + mode + "'");
}

nlohmann::json generate_image_tree(const std::vector<Attachment>& attachments,
                                   const SimulationRuleset& rules) {
    const auto report = parse_inline(attachments, "detection_report");
    nlohmann::json users = nlohmann::json::array();
    for (const auto& entry : report["entries"]) {
        const std::string category = entry["category"].get<std::string>();
        sls::ThroughputLevel level = rules.default_level;
        double mbps = SimulationRuleset::band_midpoint(level);
        if (auto it = rules.category_demand.find(category); it != rules.category_demand.end()) {
            level = it->second.level;
            mbps = it->second.mbps;
        }
        const double cx = entry["center"][0].get<double>();
        const double cy = entry["center"][1].get<double>();
        users.push_back({{"label", entry["tag"]},
                         {"x", cx},
                         {"y", cy},
                         {"throughput_level", sls::to_string(level)},
                         {"traffic_demand", mbps},
                         {"context", category + " visible at (" + canonical_number(cx) + ", " +
                                         canonical_number(cy) + ")"}});
    }
    return {{"users", std::move(users)}};
}

struct SpeakerLine {
    std::string name;
    std::string text;
};

nlohmann::json generate_audio_tree(const std::vector<Attachment>& attachments,
                                   const SimulationRuleset& rules) {
    const auto transcript = sls::Transcript::from_json(parse_inline(attachments, "transcript"));

    std::vector<SpeakerLine> speakers; // first-appearance order, one pooled entry each
    for (const auto& u : transcript.utterances) {
        const std::string name = u.speaker ? *u.speaker : "unattributed";
        auto it = std::find_if(speakers.begin(), speakers.end(),
                               [&](const SpeakerLine& s) { return s.name == name; });
        if (it == speakers.end()) {
            speakers.push_back({name, u.text});
        } else {
            it->text += " " + u.text;
        }
    }

    static const std::regex position_cue(
        R"(position ([0-9]+(?:\.[0-9]+)?) ([0-9]+(?:\.[0-9]+)?))");

    nlohmann::json users = nlohmann::json::array();
    for (const auto& speaker : speakers) {
        sls::ThroughputLevel level = rules.default_level;
        double mbps = SimulationRuleset::band_midpoint(level);
        const std::string haystack = lower(speaker.text);
        for (const auto& rule : rules.keyword_levels) {
            if (haystack.find(lower(rule.pattern)) != std::string::npos) {
                level = rule.level;
                mbps = rule.mbps;
                break;
            }
        }

        nlohmann::json x = nullptr;
        nlohmann::json y = nullptr;
        std::smatch m;
        if (std::regex_search(speaker.text, m, position_cue)) {
            const double px = std::stod(m[1].str());
            const double py = std::stod(m[2].str());
            if (sls::RelativePoint{px, py}.in_unit_square()) {
                x = px;
                y = py;
            }
        }

        users.push_back({{"label", speaker.name},
                         {"x", x},
                         {"y", y},
                         {"throughput_level", sls::to_string(level)},
                         {"traffic_demand", mbps},
                         {"context", "radio traffic: " + speaker.text}});
    }
    return {{"users", std::move(users)}};
}

nlohmann::json generate_fusion_tree(const std::vector<Attachment>& attachments) {
    std::vector<sls::PerceivedUser> image_users;
    std::vector<sls::PerceivedUser> audio_users;
    for (const auto& a : attachments) {
        if (a.kind != "agent_fragment") continue;
        auto frag = nlohmann::json::parse(a.inline_content, nullptr, false);
        if (frag.is_discarded()) {
            throw Error("ParseError", "agent_fragment attachment is not valid JSON");
        }
        auto users = parse_fused_users(nlohmann::json{{"users", frag["users"]}});
        if (frag["source"] == "image") {
            image_users = std::move(users);
        } else {
            audio_users = std::move(users);
        }
    }
    const auto directives = parse_inline(attachments, "fusion_directives");
    const auto config = fusion::FusionConfig::from_json(directives);

    nlohmann::json users = nlohmann::json::array();
    for (const auto& user : fusion::fuse_users(image_users, audio_users, config)) {
        users.push_back(sls::to_json(user));
    }
    return {{"users", std::move(users)}};
}

} // namespace

SimulationRuleset SimulationRuleset::defaults() {
    SimulationRuleset r;
    const double low = band_midpoint(sls::ThroughputLevel::low);
    const double medium = band_midpoint(sls::ThroughputLevel::medium);
    const double high = band_midpoint(sls::ThroughputLevel::high);
    r.category_demand = {
        {"person", {sls::ThroughputLevel::low, low}},
        {"motorcycle", {sls::ThroughputLevel::low, low}},
        {"car", {sls::ThroughputLevel::medium, medium}},
        {"truck", {sls::ThroughputLevel::medium, medium}},
        {"bus", {sls::ThroughputLevel::medium, medium}},
        {"airplane", {sls::ThroughputLevel::high, high}},
    };
    r.keyword_levels = {
        {"video", sls::ThroughputLevel::high, high},
        {"footage", sls::ThroughputLevel::high, high},
        {"stream", sls::ThroughputLevel::high, high},
        {"thermal", sls::ThroughputLevel::high, high},
        {"imagery", sls::ThroughputLevel::high, high},
        {"voice call", sls::ThroughputLevel::medium, medium},
        {"status update", sls::ThroughputLevel::medium, medium},
        {"telemetry", sls::ThroughputLevel::medium, medium},
        {"coordinates", sls::ThroughputLevel::medium, medium},
    };
    r.default_level = sls::ThroughputLevel::low;
    return r;
}

SimulationRuleset SimulationRuleset::from_json(const nlohmann::json& j) {
    SimulationRuleset r = defaults();
    if (j.contains("category_demand")) {
        r.category_demand.clear();
        for (const auto& [category, spec] : j["category_demand"].items()) {
            r.category_demand[category] = {parse_level(spec["level"]),
                                           spec["mbps"].get<double>()};
        }
    }
    if (j.contains("keyword_levels")) {
        r.keyword_levels.clear();
        for (const auto& rule : j["keyword_levels"]) {
            r.keyword_levels.push_back({rule["pattern"].get<std::string>(),
                                        parse_level(rule["level"]),
                                        rule["mbps"].get<double>()});
        }
    }
    if (j.contains("default_level")) r.default_level = parse_level(j["default_level"]);
    return r;
}

nlohmann::json SimulationRuleset::to_json() const {
    nlohmann::json categories = nlohmann::json::object();
    for (const auto& [category, d] : category_demand) {
        categories[category] = {{"level", sls::to_string(d.level)}, {"mbps", d.mbps}};
    }
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& rule : keyword_levels) {
        rules.push_back({{"pattern", rule.pattern},
                         {"level", sls::to_string(rule.level)},
                         {"mbps", rule.mbps}});
    }
    return {{"category_demand", std::move(categories)},
            {"keyword_levels", std::move(rules)},
            {"default_level", sls::to_string(default_level)}};
}

double SimulationRuleset::band_midpoint(sls::ThroughputLevel level) {
    switch (level) {
    case sls::ThroughputLevel::low: return 0.5;
    case sls::ThroughputLevel::medium: return 5.5;
    case sls::ThroughputLevel::high: return 30.0;
    }
    return 0.5;
}

nlohmann::json simulate_generate(const std::string& prompt,
                                 const std::vector<Attachment>& attachments,
                                 const OutputSchema& output_schema,
                                 const SimulationRuleset& rules,
                                 const std::string& malformation) {
    (void)prompt; // structured inputs travel as attachments
    nlohmann::json tree;
    if (output_schema.name == "image_agent") {
        tree = generate_image_tree(attachments, rules);
    } else if (output_schema.name == "audio_agent") {
        tree = generate_audio_tree(attachments, rules);
    } else if (output_schema.name == "fusion_agent") {
        tree = generate_fusion_tree(attachments);
    } else {
        throw Error("ConfigError", "unknown output schema '" + output_schema.name + "'");
    }
    return apply_malformation(std::move(tree), malformation);
}

SimulatedModelBackend::SimulatedModelBackend()
    : SimulatedModelBackend(SimulationRuleset::defaults(), Options{}) {}

SimulatedModelBackend::SimulatedModelBackend(SimulationRuleset rules)
    : SimulatedModelBackend(std::move(rules), Options{}) {}

SimulatedModelBackend::SimulatedModelBackend(SimulationRuleset rules, Options options)
    : rules_(std::move(rules)), options_(std::move(options)) {}

GenerationResult SimulatedModelBackend::generate_structured(
    const std::string& prompt, const std::vector<Attachment>& attachments,
    const OutputSchema& output_schema) {
    GenerationResult result;
    result.tree = simulate_generate(prompt, attachments, output_schema, rules_,
                                    options_.malformation);
    result.latency_s = options_.injected_delay_s;
    if (!options_.virtual_delay && options_.injected_delay_s > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(options_.injected_delay_s));
    }
    return result;
}

} // namespace maps::agents
