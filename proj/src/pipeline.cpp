#include "maps/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "json_io.hpp"

namespace maps::pipeline {

namespace {

class StageTimer {
public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - t0_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point t0_ = clock::now();
};

// Captures every successful model response into the replay layout.
class RecordingBackend : public agents::ModelBackend {
public:
    RecordingBackend(std::unique_ptr<agents::ModelBackend> inner,
                     backend_http::BackendConfig config, std::string scenario_id)
        : inner_(std::move(inner)), config_(std::move(config)),
          scenario_id_(std::move(scenario_id)) {}

    std::string identity() const override { return inner_->identity(); }
    bool concurrent_ok() const override { return inner_->concurrent_ok(); }
    bool virtual_time() const override { return inner_->virtual_time(); }

    agents::GenerationResult generate_structured(
        const std::string& prompt, const std::vector<agents::Attachment>& attachments,
        const agents::OutputSchema& output_schema) override {
        auto result = inner_->generate_structured(prompt, attachments, output_schema);
        backend_http::record_fixture(
            config_, scenario_id_, output_schema.name,
            backend_http::build_wire_request(config_, prompt, attachments, output_schema),
            result.tree);
        return result;
    }

private:
    std::unique_ptr<agents::ModelBackend> inner_;
    backend_http::BackendConfig config_;
    std::string scenario_id_;
};

} // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir) {
    PipelineConfig c;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };

    if (j.contains("filter_policy_path")) {
        c.policy = perception::FilterPolicy::from_json(
            detail::load_json_file(resolve(j["filter_policy_path"].get<std::string>())));
    } else if (j.contains("filter_policy")) {
        c.policy = perception::FilterPolicy::from_json(j["filter_policy"]);
    }

    if (j.contains("detector")) {
        const auto& d = j["detector"];
        if (d.contains("kind")) c.detector.kind = d["kind"].get<std::string>();
        if (d.contains("url")) c.detector.url = d["url"].get<std::string>();
        if (d.contains("timeout_s")) c.detector.timeout_s = d["timeout_s"].get<double>();
        if (c.detector.kind != "file" && c.detector.kind != "http") {
            throw Error("ConfigError", "unknown detector kind '" + c.detector.kind + "'");
        }
    }

    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("kind")) c.model.kind = m["kind"].get<std::string>();
        if (c.model.kind == "simulated") {
            if (m.contains("ruleset_path")) {
                c.model.ruleset = agents::SimulationRuleset::from_json(
                    detail::load_json_file(resolve(m["ruleset_path"].get<std::string>())));
            } else if (m.contains("ruleset")) {
                c.model.ruleset = agents::SimulationRuleset::from_json(m["ruleset"]);
            }
            if (m.contains("injected_delay_s")) {
                c.model.injected_delay_s = m["injected_delay_s"].get<double>();
            }
            if (m.contains("virtual_delay")) {
                c.model.virtual_delay = m["virtual_delay"].get<bool>();
            }
        } else if (c.model.kind == "replay") {
            if (!m.contains("root")) {
                throw Error("ConfigError", "replay model needs a fixture root");
            }
            c.model.replay_root = resolve(m["root"].get<std::string>());
        } else if (c.model.kind == "live") {
            if (!m.contains("http")) {
                throw Error("ConfigError", "live model needs an http section");
            }
            c.model.http = backend_http::BackendConfig::from_json(m["http"]);
            if (!c.model.http.record_dir.empty()) {
                c.model.http.record_dir = resolve(c.model.http.record_dir).string();
            }
        } else {
            throw Error("ConfigError", "unknown model kind '" + c.model.kind + "'");
        }
    }

    if (j.contains("fusion")) c.fusion = fusion::FusionConfig::from_json(j["fusion"]);

    if (j.contains("bands")) {
        const auto& b = j["bands"];
        if (b.contains("low_max")) c.bands.low_max = b["low_max"].get<double>();
        if (b.contains("medium_max")) c.bands.medium_max = b["medium_max"].get<double>();
        if (b.contains("high_max")) c.bands.high_max = b["high_max"].get<double>();
        if (!(c.bands.low_max > 0 && c.bands.low_max < c.bands.medium_max &&
              c.bands.medium_max < c.bands.high_max)) {
            throw Error("ConfigError", "bands must satisfy 0 < low < medium < high");
        }
    }

    if (j.contains("pipeline_version")) {
        c.pipeline_version = j["pipeline_version"].get<std::string>();
    }
    if (j.contains("generated_at")) {
        const std::string at = j["generated_at"].get<std::string>();
        if (!sls::is_rfc3339(at)) {
            throw Error("ConfigError", "generated_at override is not an RFC 3339 timestamp");
        }
        c.generated_at = at;
    }
    if (j.contains("concurrent_agents")) {
        c.concurrent_agents = j["concurrent_agents"].get<bool>();
    }
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& config_path) {
    return from_json(detail::load_json_file(config_path), config_path.parent_path());
}

std::string PipelineConfig::resolve_generated_at() const {
    if (generated_at) return *generated_at;
    if (model.kind == "live") return sls::rfc3339_utc_now();
    return "1970-01-01T00:00:00Z"; // deterministic backends stamp a fixed instant
}

std::unique_ptr<perception::DetectorBackend> make_detector(const DetectorConfig& config) {
    if (config.kind == "file") {
        return std::make_unique<perception::FileDetectorBackend>();
    }
    if (config.kind == "http") {
        if (config.url.empty()) throw Error("ConfigError", "http detector needs a url");
        return std::make_unique<perception::HttpDetectorBackend>(config.url, config.timeout_s);
    }
    throw Error("ConfigError", "unknown detector kind '" + config.kind + "'");
}

std::unique_ptr<agents::ModelBackend> make_model_backend(const ModelConfig& config,
                                                         const std::string& scenario_id) {
    if (config.kind == "simulated") {
        agents::SimulatedModelBackend::Options options;
        options.injected_delay_s = config.injected_delay_s;
        options.virtual_delay = config.virtual_delay;
        return std::make_unique<agents::SimulatedModelBackend>(config.ruleset, options);
    }
    if (config.kind == "replay") {
        return std::make_unique<agents::ReplayModelBackend>(config.replay_root, scenario_id);
    }
    if (config.kind == "live") {
        auto live = std::make_unique<backend_http::HttpModelBackend>(config.http);
        if (!config.http.record_dir.empty()) {
            return std::make_unique<RecordingBackend>(std::move(live), config.http, scenario_id);
        }
        return live;
    }
    throw Error("ConfigError", "unknown model kind '" + config.kind + "'");
}

RunResult run_scenario(const forge::ScenarioManifest& manifest, const PipelineConfig& config,
                       bool require_audio) {
    auto detector = make_detector(config.detector);
    auto backend = make_model_backend(config.model, manifest.scenario_id);

    RunResult result;

    StageTimer perception_timer;
    const std::string frame_ref = config.detector.kind == "file"
                                      ? manifest.frame_file().string()
                                      : manifest.frame;
    const perception::DetectionFrame frame = detector->detect(frame_ref);
    const auto filtered = perception::filter_detections(frame.detections, config.policy);
    result.report =
        perception::build_detection_report(frame.frame_id, frame.width, frame.height, filtered);

    const auto transcript = manifest.load_transcript();
    if (require_audio && !transcript) {
        throw Error("MissingPart", "the manifest has no transcript part and audio is required");
    }
    const double perception_s = perception_timer.seconds();

    const bool add_virtual = backend->virtual_time();
    auto image_task = [&]() {
        StageTimer t;
        auto fragment = agents::run_image_agent(result.report, *backend);
        double wall = t.seconds();
        if (add_virtual) wall += fragment.raw_latency_s;
        return std::make_pair(std::move(fragment), wall);
    };
    auto audio_task = [&]() {
        StageTimer t;
        auto fragment =
            agents::run_audio_agent(transcript ? *transcript : sls::Transcript{}, *backend);
        double wall = t.seconds();
        if (add_virtual) wall += fragment.raw_latency_s;
        return std::make_pair(std::move(fragment), wall);
    };

    std::pair<agents::AgentFragment, double> image_out, audio_out;
    if (config.concurrent_agents && backend->concurrent_ok()) {
        auto image_future = std::async(std::launch::async, image_task);
        audio_out = audio_task();
        image_out = image_future.get();
    } else {
        image_out = image_task();
        audio_out = audio_task();
    }

    fusion::SlsMeta meta{manifest.scenario_id, config.resolve_generated_at(),
                         backend->identity(), config.pipeline_version};

    double generate_fusion_s = 0;
    double fusion_s = 0;
    if (config.fusion.mode == fusion::Mode::model_delegated) {
        StageTimer t;
        auto delegated =
            fusion::fuse_delegated(image_out.first, audio_out.first, config.fusion, meta, *backend);
        generate_fusion_s = t.seconds();
        if (add_virtual) generate_fusion_s += delegated.latency_s;
        result.spec = std::move(delegated.spec);
    } else {
        StageTimer t;
        result.spec = fusion::fuse(image_out.first, audio_out.first, config.fusion, meta);
        fusion_s = t.seconds();
    }

    StageTimer emit_timer;
    result.serialized_sls = sls::serialize_sls(result.spec);
    const auto checked =
        sls::validate_sls(nlohmann::json::parse(result.serialized_sls), config.bands);
    if (!checked.ok()) {
        throw Error("SchemaViolation", "emitted spec rejected: " + checked.errors.front().path +
                                           " " + checked.errors.front().detail);
    }
    const double emit_s = emit_timer.seconds();

    result.profile = evalkit::RunProfile::from_stages({
        {"perception", perception_s},
        {"generate_content.image", image_out.second},
        {"generate_content.audio", audio_out.second},
        {"generate_content.fusion", generate_fusion_s},
        {"fusion", fusion_s},
        {"emit", emit_s},
    });
    result.counts = {image_out.first.users.size(), audio_out.first.users.size(),
                     result.spec.users.size()};
    return result;
}

void write_outputs(const RunResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    detail::write_text_file(out_dir / "sls.json", result.serialized_sls);
    detail::write_canonical_file(out_dir / "profile.json", result.profile.to_json());
    detail::write_text_file(out_dir / "overlay.svg", perception::emit_overlay(result.report));
}

namespace {

struct ScenarioBatch {
    std::vector<BenchRow> rows;
    std::vector<double> totals;
    std::vector<evalkit::RunProfile> profiles;
    int failures = 0;
};

ScenarioBatch bench_one(const forge::ScenarioManifest& manifest, const PipelineConfig& config,
                        const BenchParams& params) {
    ScenarioBatch batch;
    for (int run = 1; run <= params.runs; ++run) {
        BenchRow row;
        row.scenario_id = manifest.scenario_id;
        row.run = run;
        try {
            auto result = run_scenario(manifest, config, params.require_audio);
            const auto gt = manifest.load_ground_truth();
            row.record = evalkit::evaluate_scenario(result.spec, gt, result.counts);
            row.total_seconds = result.profile.total_seconds;
            batch.totals.push_back(result.profile.total_seconds);
            batch.profiles.push_back(std::move(result.profile));
        } catch (const Error& e) {
            row.status = "error:" + e.kind();
            ++batch.failures;
        } catch (const std::exception&) {
            row.status = "error:Internal";
            ++batch.failures;
        }
        batch.rows.push_back(std::move(row));
    }
    return batch;
}

} // namespace

BenchOutcome run_bench(const std::vector<forge::ScenarioManifest>& dataset,
                       const PipelineConfig& config, const BenchParams& params) {
    if (dataset.empty()) throw Error("ConfigError", "dataset holds no scenarios");
    if (params.runs < 1) throw Error("ConfigError", "runs must be >= 1");
    if (params.jobs < 1) throw Error("ConfigError", "jobs must be >= 1");

    std::vector<ScenarioBatch> batches(dataset.size());
    const auto workers =
        static_cast<std::size_t>(std::min<std::size_t>(params.jobs, dataset.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            batches[i] = bench_one(dataset[i], config, params);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto drain = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= dataset.size()) break;
                batches[i] = bench_one(dataset[i], config, params);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
        for (auto& t : pool) t.join();
    }

    BenchOutcome outcome;
    for (auto& batch : batches) {
        outcome.failures += batch.failures;
        for (auto& row : batch.rows) outcome.rows.push_back(std::move(row));
        for (double t : batch.totals) outcome.totals.push_back(t);
        for (auto& profile : batch.profiles) outcome.profiles.push_back(std::move(profile));
    }
    return outcome;
}

void write_bench_outputs(const BenchOutcome& outcome, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::string report = evalkit::csv_header() + "\n";
    for (const auto& row : outcome.rows) {
        if (row.record) {
            report += evalkit::csv_row(*row.record, row.total_seconds, row.status) + "\n";
        } else {
            evalkit::EvaluationRecord blank;
            blank.scenario_id = row.scenario_id;
            report += evalkit::csv_row(blank, 0, row.status) + "\n";
        }
    }
    detail::write_text_file(out_dir / "report.csv", report);

    std::string cdf = "seconds,cum_fraction\n";
    if (!outcome.totals.empty()) {
        cdf = evalkit::cdf_csv(evalkit::cdf_points(outcome.totals));
    }
    detail::write_text_file(out_dir / "cdf.csv", cdf);

    std::string stages = "stage,mean_fraction\n";
    if (!outcome.profiles.empty()) {
        for (const auto& row : evalkit::profile_report(outcome.profiles)) {
            stages += row.stage + "," + canonical_number(row.mean_fraction) + "\n";
        }
    }
    detail::write_text_file(out_dir / "stages.csv", stages);
}

} // namespace maps::pipeline
