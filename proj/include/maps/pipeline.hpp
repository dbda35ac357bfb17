#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maps/agents.hpp"
#include "maps/backend_http.hpp"
#include "maps/evalkit.hpp"
#include "maps/forge.hpp"
#include "maps/fusion.hpp"
#include "maps/perception.hpp"
#include "maps/sls.hpp"

namespace maps::pipeline {

struct DetectorConfig {
    std::string kind = "file"; // file | http
    std::string url;           // http kind only
    double timeout_s = 30;
};

struct ModelConfig {
    std::string kind = "simulated"; // simulated | replay | live
    agents::SimulationRuleset ruleset = agents::SimulationRuleset::defaults();
    double injected_delay_s = 0; // simulated kind
    bool virtual_delay = true;   // simulated kind: report delays without sleeping
    std::filesystem::path replay_root; // replay kind
    backend_http::BackendConfig http;  // live kind
};

struct PipelineConfig {
    perception::FilterPolicy policy = perception::FilterPolicy::defaults();
    DetectorConfig detector;
    ModelConfig model;
    fusion::FusionConfig fusion;
    sls::DemandBands bands;
    std::string pipeline_version = "0.1.0";
    // Timestamp override; without it deterministic backends stamp the epoch
    // and the live backend stamps the current time.
    std::optional<std::string> generated_at;
    bool concurrent_agents = true;
    std::filesystem::path output_dir = "out";

    // Relative paths inside j resolve against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir);
    static PipelineConfig load(const std::filesystem::path& config_path);

    std::string resolve_generated_at() const;
};

std::unique_ptr<perception::DetectorBackend> make_detector(const DetectorConfig& config);
std::unique_ptr<agents::ModelBackend> make_model_backend(const ModelConfig& config,
                                                         const std::string& scenario_id);

struct RunResult {
    sls::ServiceLevelSpec spec;
    evalkit::RunProfile profile; // stages: perception, generate_content.{image,audio,fusion}, fusion, emit
    evalkit::AgentCounts counts;
    perception::DetectionReport report;
    std::string serialized_sls;
};

// One full cycle: perception, the two agents (concurrent when permitted),
// fusion, emission. require_audio rejects manifests without a transcript
// part. Backends reporting virtual latency have it added onto the measured
// wall time of their stages; total_seconds is always the stage sum.
RunResult run_scenario(const forge::ScenarioManifest& manifest, const PipelineConfig& config,
                       bool require_audio = false);

// sls.json, profile.json, overlay.svg under out_dir.
void write_outputs(const RunResult& result, const std::filesystem::path& out_dir);

struct BenchParams {
    int runs = 10;
    int jobs = 1;
    bool require_audio = false;
};

struct BenchRow {
    std::string scenario_id;
    int run = 0;
    std::optional<evalkit::EvaluationRecord> record; // absent for failed runs
    double total_seconds = 0;
    std::string status = "ok"; // "error:<kind>" on failure
};

struct BenchOutcome {
    std::vector<BenchRow> rows;
    std::vector<double> totals; // successful runs only
    std::vector<evalkit::RunProfile> profiles;
    int failures = 0;
};

// Every scenario runs params.runs times; failures are recorded per row and
// never abort the batch. Scenarios may run concurrently up to params.jobs.
BenchOutcome run_bench(const std::vector<forge::ScenarioManifest>& dataset,
                       const PipelineConfig& config, const BenchParams& params);

// report.csv, cdf.csv and stages.csv under out_dir.
void write_bench_outputs(const BenchOutcome& outcome, const std::filesystem::path& out_dir);

} // namespace maps::pipeline
