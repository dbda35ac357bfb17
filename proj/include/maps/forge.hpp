#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "maps/perception.hpp"
#include "maps/sls.hpp"

namespace maps::forge {

struct GtBox {
    sls::BoundingBox box;
    std::string category;
    bool user_bearing = true;
};

struct GroundTruth {
    std::vector<GtBox> boxes;

    std::size_t user_bearing_count() const;
    static GroundTruth from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Seeded sampling. Samplers are hand-rolled over a fixed-width engine so a
// seed realizes the same values on every platform; the standard distribution
// classes leave their algorithms implementation-defined.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();                                            // [0, 1)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive, unbiased
    double normal(double mean, double stddev);                   // Box-Muller
    std::int64_t poisson(double mean);                           // Knuth product method

private:
    std::mt19937_64 engine_;
};

// Stable per-index stream seeds for one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct ConfidenceLaw {
    double mean = 0.85;
    double spread = 0.05;
};

struct NoiseModel {
    double miss_rate = 0;           // per planted box drop probability
    double false_positive_rate = 0; // expected spurious detections per frame
    std::map<std::string, ConfidenceLaw> confidence_law; // per-category override
    ConfidenceLaw default_confidence;

    ConfidenceLaw law_for(const std::string& category) const;
    void validate() const; // ConfigError outside stated ranges
};

struct PhraseBank {
    std::vector<std::string> phrases;

    static PhraseBank defaults();
};

struct GenerateParams {
    std::string scenario_id;
    std::uint64_t seed = 0;
    int n_users = 0;
    std::map<std::string, double> category_mix = default_mix();
    NoiseModel noise;
    double frame_width = 1280;
    double frame_height = 720;
    bool with_transcript = true;

    static std::map<std::string, double> default_mix();
};

struct ScenarioManifest {
    std::string scenario_id;
    std::filesystem::path dir;
    std::string frame; // detection fixture path, relative to dir
    std::optional<std::string> transcript_path;
    std::string ground_truth_path;
    nlohmann::json metadata;

    std::filesystem::path frame_file() const { return dir / frame; }
    std::optional<std::filesystem::path> transcript_file() const;
    std::filesystem::path ground_truth_file() const { return dir / ground_truth_path; }

    perception::DetectionFrame load_frame() const;
    std::optional<sls::Transcript> load_transcript() const;
    GroundTruth load_ground_truth() const;
};

// Plants n_users non-overlapping user-bearing boxes by rejection sampling
// (at most 1000 attempts per box, then PlacementFailure).
GroundTruth plant_boxes(const GenerateParams& params, Rng& rng);

// Keeps each planted box with probability 1 - miss_rate, samples confidences
// from the per-category law, then appends Poisson(false_positive_rate)
// spurious detections.
perception::DetectionFrame realize_detections(const GenerateParams& params,
                                              const GroundTruth& gt, Rng& rng);

// One or two speakers anchored to user-bearing boxes that survived into the
// fixture; each opening utterance carries a spoken "position x y" cue plus a
// demand cue, so downstream audio analysis can place and size the speaker.
sls::Transcript synthesize_transcript(const perception::DetectionFrame& fixture,
                                      const GroundTruth& gt, const PhraseBank& bank, Rng& rng);

// Writes manifest.json, detections.json, transcript.json and
// ground_truth.json under out_dir; every byte is a function of params.
ScenarioManifest generate_scenario(const GenerateParams& params, const PhraseBank& bank,
                                   const std::filesystem::path& out_dir);

struct DatasetParams {
    std::uint64_t seed = 0;
    int scenarios = 20;
    int users_min = 5;
    int users_max = 45;
    double miss_rate = 0;
    double false_positive_rate = 0;
};

std::vector<ScenarioManifest> generate_dataset(const DatasetParams& params,
                                               const std::filesystem::path& out_dir);

// Reads either a manifest.json path or a scenario directory; verifies the
// referenced parts exist (MissingPart) before returning.
ScenarioManifest load_manifest(const std::filesystem::path& path);

} // namespace maps::forge
