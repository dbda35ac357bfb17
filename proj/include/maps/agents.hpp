#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maps/perception.hpp"
#include "maps/sls.hpp"

namespace maps::agents {

struct TokenUsage {
    long prompt_tokens = 0;
    long output_tokens = 0;
};

struct GenerationResult {
    nlohmann::json tree;
    double latency_s = 0; // backend-reported; includes virtual delay when simulated
    std::optional<TokenUsage> usage;
};

// Content parts shipped next to the prompt. Exactly one of uri /
// inline_content is set; inline JSON goes over the wire base64-encoded.
struct Attachment {
    std::string kind; // "frame", "detection_report", "transcript", "agent_fragment", "fusion_directives"
    std::string uri;
    std::string inline_content;
};

struct OutputSchema {
    std::string name; // "image_agent" | "audio_agent" | "fusion_agent"; replay fixture filename stem
    nlohmann::json schema;
};

const OutputSchema& image_agent_schema();
const OutputSchema& audio_agent_schema();
const OutputSchema& fusion_agent_schema(); // users carry provenance here

// Structured-generation backend. Implementations guarantee the returned
// tree conforms to output_schema or raise SchemaViolation.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string identity() const = 0;
    virtual bool concurrent_ok() const { return true; }
    // True when reported latency is simulated rather than slept/measured;
    // the pipeline then adds it on top of measured wall time.
    virtual bool virtual_time() const { return false; }
    virtual GenerationResult generate_structured(const std::string& prompt,
                                                 const std::vector<Attachment>& attachments,
                                                 const OutputSchema& output_schema) = 0;
};

// Per-modality intermediate result. Every user carries the fragment source
// in provenance; image users always have positions.
struct AgentFragment {
    std::string source; // "image" | "audio"
    std::vector<sls::PerceivedUser> users;
    double raw_latency_s = 0;
};

struct PromptBundle {
    std::string text;
    std::vector<Attachment> attachments;
};

// Pure functions of their inputs; identical input gives identical bytes.
PromptBundle build_image_prompt(const perception::DetectionReport& report);
PromptBundle build_audio_prompt(const sls::Transcript& transcript);

// Parses a {users:[...]} tree into typed users with provenance = {source};
// throws SchemaViolation (with the offending tree attached) on any
// nonconforming field. source "image" additionally requires positions.
std::vector<sls::PerceivedUser> parse_fragment_users(const nlohmann::json& tree,
                                                     const std::string& source);

// Fusion-agent output: users carry explicit provenance arrays.
std::vector<sls::PerceivedUser> parse_fused_users(const nlohmann::json& tree);

AgentFragment run_image_agent(const perception::DetectionReport& report, ModelBackend& backend);
AgentFragment run_audio_agent(const sls::Transcript& transcript, ModelBackend& backend);

const Attachment* find_attachment(const std::vector<Attachment>& attachments,
                                  const std::string& kind);

// ---------------------------------------------------------------------------
// Simulated backend: deterministic stand-in for the live model.

struct CategoryDemand {
    sls::ThroughputLevel level = sls::ThroughputLevel::low;
    double mbps = 0.5;
};

struct KeywordRule {
    std::string pattern; // case-insensitive substring
    sls::ThroughputLevel level = sls::ThroughputLevel::low;
    double mbps = 0.5;
};

struct SimulationRuleset {
    std::map<std::string, CategoryDemand> category_demand;
    std::vector<KeywordRule> keyword_levels; // priority = list order
    sls::ThroughputLevel default_level = sls::ThroughputLevel::low;

    static SimulationRuleset defaults();
    // {category_demand:{cat:{level,mbps}}, keyword_levels:[{pattern,level,mbps}], default_level}
    static SimulationRuleset from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    // Demand band midpoints; stand-in numbers only.
    static double band_midpoint(sls::ThroughputLevel level);
};

// Deterministic, schema-conforming tree for any agent prompt. Image path:
// one user per report entry (demand from the category table, position =
// report center). Audio path: one user per distinct speaker, level from the
// highest-priority keyword hit, position from an explicit "position X Y"
// cue when one is spoken. Fusion path: deterministic merge of the attached
// fragments. malformation (e.g. "drop_field:context", "bad_enum:throughput_level",
// "negative_demand", "duplicate_label", "not_object") corrupts the tree for
// negative tests.
nlohmann::json simulate_generate(const std::string& prompt,
                                 const std::vector<Attachment>& attachments,
                                 const OutputSchema& output_schema,
                                 const SimulationRuleset& rules,
                                 const std::string& malformation = "");

class SimulatedModelBackend : public ModelBackend {
public:
    struct Options {
        double injected_delay_s = 0; // per-call latency
        bool virtual_delay = true;   // report without sleeping
        std::string malformation;
    };

    SimulatedModelBackend();
    explicit SimulatedModelBackend(SimulationRuleset rules);
    SimulatedModelBackend(SimulationRuleset rules, Options options);

    std::string identity() const override { return "simulated"; }
    bool virtual_time() const override { return options_.virtual_delay; }
    GenerationResult generate_structured(const std::string& prompt,
                                         const std::vector<Attachment>& attachments,
                                         const OutputSchema& output_schema) override;

private:
    SimulationRuleset rules_;
    Options options_;
};

// Replays recorded trees from <root>/<scenario_id>/<schema name>.json.
class ReplayModelBackend : public ModelBackend {
public:
    ReplayModelBackend(std::filesystem::path root, std::string scenario_id);

    std::string identity() const override { return "replay"; }
    GenerationResult generate_structured(const std::string& prompt,
                                         const std::vector<Attachment>& attachments,
                                         const OutputSchema& output_schema) override;

private:
    std::filesystem::path root_;
    std::string scenario_id_;
};

} // namespace maps::agents
