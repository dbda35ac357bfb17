#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "maps/evalkit.hpp"
#include "maps/forge.hpp"
#include "maps/pipeline.hpp"
#include "maps/sls.hpp"

namespace {

namespace fs = std::filesystem;

nlohmann::json load_json_or_throw(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw maps::Error("MissingPart", "cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw maps::Error("ParseError", "invalid JSON in " + path.string());
    return j;
}

maps::pipeline::PipelineConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return {};
    return maps::pipeline::PipelineConfig::load(config_path);
}

nlohmann::json issues_to_json(const std::vector<maps::sls::Issue>& issues) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& issue : issues) {
        out.push_back({{"kind", maps::sls::to_string(issue.kind)},
                       {"path", issue.path},
                       {"detail", issue.detail}});
    }
    return out;
}

int cmd_run(const std::string& manifest_path, const std::string& config_path,
            const std::string& out_dir, bool require_audio, bool verbose) {
    const auto config = load_config(config_path);
    const auto manifest = maps::forge::load_manifest(manifest_path);
    const auto result = maps::pipeline::run_scenario(manifest, config, require_audio);
    maps::pipeline::write_outputs(result, out_dir);
    if (verbose) {
        for (const auto& [stage, seconds] : result.profile.stages) {
            std::cerr << stage << " " << maps::canonical_number(seconds) << "s\n";
        }
    }
    std::cout << nlohmann::json{{"out_dir", out_dir},
                                {"users", result.spec.users.size()},
                                {"total_seconds", result.profile.total_seconds}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_evaluate(const std::string& sls_path, const std::string& gt_path) {
    const auto checked = maps::sls::validate_sls(load_json_or_throw(sls_path));
    if (!checked.ok()) {
        const auto& first = checked.errors.front();
        throw maps::Error("SchemaViolation",
                          sls_path + ": " + first.path + " " + first.detail);
    }
    const auto gt = maps::forge::GroundTruth::from_json(load_json_or_throw(gt_path));

    maps::evalkit::AgentCounts counts;
    counts.fused = checked.spec->users.size();
    for (const auto& user : checked.spec->users) {
        if (user.provenance.image) ++counts.image;
        if (user.provenance.audio) ++counts.audio;
    }
    const auto record = maps::evalkit::evaluate_scenario(*checked.spec, gt, counts);
    std::cout << nlohmann::json{{"scenario_id", record.scenario_id},
                                {"n_gt", record.n_ground_truth},
                                {"n_detected", record.n_detected},
                                {"accuracy_pct", record.accuracy_pct},
                                {"image_count", record.per_agent.image},
                                {"audio_count", record.per_agent.audio},
                                {"fused_count", record.per_agent.fused}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_validate(const std::string& sls_path) {
    const auto checked = maps::sls::validate_sls(load_json_or_throw(sls_path));
    std::cout << nlohmann::json{{"ok", checked.ok()},
                                {"errors", issues_to_json(checked.errors)},
                                {"warnings", issues_to_json(checked.warnings)}}
                     .dump()
              << "\n";
    return checked.ok() ? 0 : 1;
}

int cmd_generate_dataset(const maps::forge::DatasetParams& params, const std::string& out_dir) {
    const auto manifests = maps::forge::generate_dataset(params, out_dir);
    std::cout << nlohmann::json{{"scenarios", manifests.size()}, {"out_dir", out_dir}}.dump()
              << "\n";
    return 0;
}

int cmd_bench(const std::string& dataset_dir, const std::string& config_path, int runs, int jobs,
              const std::string& out_override) {
    const auto config = load_config(config_path);

    std::vector<fs::path> scenario_dirs;
    if (fs::is_directory(dataset_dir)) {
        for (const auto& entry : fs::directory_iterator(dataset_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
                scenario_dirs.push_back(entry.path());
            }
        }
    }
    std::sort(scenario_dirs.begin(), scenario_dirs.end());
    std::vector<maps::forge::ScenarioManifest> dataset;
    dataset.reserve(scenario_dirs.size());
    for (const auto& dir : scenario_dirs) dataset.push_back(maps::forge::load_manifest(dir));

    maps::pipeline::BenchParams params;
    params.runs = runs;
    params.jobs = jobs;
    const auto outcome = maps::pipeline::run_bench(dataset, config, params);

    const fs::path out_dir = out_override.empty() ? config.output_dir : fs::path(out_override);
    maps::pipeline::write_bench_outputs(outcome, out_dir);
    std::cout << nlohmann::json{{"scenarios", dataset.size()},
                                {"rows", outcome.rows.size()},
                                {"failures", outcome.failures},
                                {"out_dir", out_dir.string()}}
                     .dump()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV perception to service level specification pipeline"};
    app.require_subcommand(1);

    std::string manifest_path, config_path, out_dir, sls_path, gt_path, dataset_dir;
    bool require_audio = false;
    bool verbose = false;

    auto* run = app.add_subcommand("run", "Run one scenario through the pipeline");
    run->add_option("--manifest", manifest_path, "Scenario manifest or directory")->required();
    run->add_option("--config", config_path, "Pipeline config file");
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_flag("--require-audio", require_audio, "Fail when the manifest has no transcript");
    run->add_flag("--verbose", verbose, "Print stage timings to stderr");

    auto* evaluate = app.add_subcommand("evaluate", "Score an SLS file against ground truth");
    evaluate->add_option("--sls", sls_path, "SLS file")->required();
    evaluate->add_option("--ground-truth", gt_path, "Ground truth file")->required();

    auto* validate = app.add_subcommand("validate", "Check an SLS file against the schema");
    validate->add_option("--sls", sls_path, "SLS file")->required();

    maps::forge::DatasetParams dataset_params;
    auto* generate = app.add_subcommand("generate-dataset", "Forge a synthetic scenario dataset");
    generate->add_option("--seed", dataset_params.seed, "Base seed")->required();
    generate->add_option("--scenarios", dataset_params.scenarios, "Scenario count");
    generate->add_option("--users-min", dataset_params.users_min, "Minimum planted users");
    generate->add_option("--users-max", dataset_params.users_max, "Maximum planted users");
    generate->add_option("--miss-rate", dataset_params.miss_rate, "Detection miss probability");
    generate->add_option("--fp-rate", dataset_params.false_positive_rate,
                         "Expected spurious detections per frame");
    generate->add_option("--out", out_dir, "Dataset directory")->required();

    int runs = 10;
    int jobs = 1;
    std::string bench_out;
    auto* bench = app.add_subcommand("bench", "Run and evaluate a whole dataset");
    bench->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    bench->add_option("--config", config_path, "Pipeline config file");
    bench->add_option("--runs", runs, "Runs per scenario");
    bench->add_option("--jobs", jobs, "Concurrent scenarios");
    bench->add_option("--out", bench_out, "Report directory (defaults to the config output_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            return cmd_run(manifest_path, config_path, out_dir, require_audio, verbose);
        }
        if (evaluate->parsed()) return cmd_evaluate(sls_path, gt_path);
        if (validate->parsed()) return cmd_validate(sls_path);
        if (generate->parsed()) return cmd_generate_dataset(dataset_params, out_dir);
        if (bench->parsed()) return cmd_bench(dataset_dir, config_path, runs, jobs, bench_out);
    } catch (const maps::Error& e) {
        std::string message = e.what();
        const std::string prefix = e.kind() + ": ";
        if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
        std::cerr << nlohmann::json{{"error", {{"kind", e.kind()}, {"message", message}}}}.dump()
                  << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", {{"kind", "Internal"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 1;
    }
    return 2;
}
