#include "maps/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"
#include "json_io.hpp"

namespace maps::forge {

// ---------------------------------------------------------------------------
// Sampling

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw Error("ConfigError", "uniform_int range is empty");
    const std::uint64_t range =
        static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t zone = (std::numeric_limits<std::uint64_t>::max() / range) * range;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= zone);
    return lo + static_cast<std::int64_t>(x % range);
}

double Rng::normal(double mean, double stddev) {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0);
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    return mean + stddev * z;
}

std::int64_t Rng::poisson(double mean) {
    if (mean <= 0) return 0;
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > limit);
    return k - 1;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// ---------------------------------------------------------------------------
// Ground truth

std::size_t GroundTruth::user_bearing_count() const {
    return static_cast<std::size_t>(
        std::count_if(boxes.begin(), boxes.end(), [](const GtBox& b) { return b.user_bearing; }));
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("boxes") || !j["boxes"].is_array()) {
        throw Error("ParseError", "ground truth must carry a boxes array");
    }
    GroundTruth gt;
    for (const auto& jb : j["boxes"]) {
        if (!jb.contains("box") || !jb["box"].is_array() || jb["box"].size() != 4 ||
            !jb.contains("category") || !jb["category"].is_string() ||
            !jb.contains("user_bearing") || !jb["user_bearing"].is_boolean()) {
            throw Error("ParseError", "malformed ground truth box entry");
        }
        GtBox b;
        b.box = {jb["box"][0].get<double>(), jb["box"][1].get<double>(),
                 jb["box"][2].get<double>(), jb["box"][3].get<double>()};
        b.category = jb["category"].get<std::string>();
        b.user_bearing = jb["user_bearing"].get<bool>();
        if (!b.box.valid()) {
            throw Error("ParseError", "ground truth box is degenerate");
        }
        gt.boxes.push_back(std::move(b));
    }
    return gt;
}

nlohmann::json GroundTruth::to_json() const {
    nlohmann::json jboxes = nlohmann::json::array();
    for (const auto& b : boxes) {
        jboxes.push_back({{"box", {b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max}},
                          {"category", b.category},
                          {"user_bearing", b.user_bearing}});
    }
    return {{"boxes", std::move(jboxes)}};
}

// ---------------------------------------------------------------------------
// Noise

ConfidenceLaw NoiseModel::law_for(const std::string& category) const {
    auto it = confidence_law.find(category);
    return it == confidence_law.end() ? default_confidence : it->second;
}

void NoiseModel::validate() const {
    if (miss_rate < 0 || miss_rate > 1) {
        throw Error("ConfigError", "miss_rate must be in [0, 1]");
    }
    if (false_positive_rate < 0) {
        throw Error("ConfigError", "false_positive_rate must be >= 0");
    }
    auto check_law = [](const ConfidenceLaw& law) {
        if (law.mean < 0 || law.mean > 1 || law.spread < 0) {
            throw Error("ConfigError", "confidence law needs mean in [0, 1] and spread >= 0");
        }
    };
    check_law(default_confidence);
    for (const auto& [category, law] : confidence_law) {
        (void)category;
        check_law(law);
    }
}

// ---------------------------------------------------------------------------
// Phrases

PhraseBank PhraseBank::defaults() {
    return {{
        "We need medical assistance near the staging area",
        "Smoke is getting thicker on the east slope",
        "Two hikers are stranded by the riverbank",
        "The access road is blocked by fallen trees",
        "Evacuation of the lower village is underway",
        "We can see the fire line from our location",
        "A rescue team is moving toward the ridge",
        "Water supplies are running low at the camp",
        "The bridge looks damaged but passable on foot",
        "Strong winds are pushing the smoke north",
        "We found an abandoned vehicle off the trail",
        "Three families are waiting at the assembly point",
        "Power lines are down across the main street",
        "The helicopter cannot land in this clearing",
        "We are escorting an injured climber downhill",
        "Visibility is poor beyond the tree line",
        "A supply truck is stuck at the checkpoint",
        "The shelter at the school is almost full",
        "We hear calls for help from the ravine",
        "Floodwater is rising near the pumping station",
        "The team on the north flank needs relief",
        "Debris is blocking the culvert by the farm",
        "We are marking safe paths with orange tape",
        "A drone overhead would help us scout ahead",
        "The generator at the clinic is failing",
        "Livestock are loose on the county road",
        "We reached the summit relay station",
        "Ash is falling over the parking area",
        "The river crossing is too dangerous tonight",
        "Volunteers are assembling at the fire hall",
    }};
}

std::map<std::string, double> GenerateParams::default_mix() {
    return {{"person", 0.5}, {"car", 0.2},        {"truck", 0.1},
            {"bus", 0.05},   {"motorcycle", 0.1}, {"airplane", 0.05}};
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct SizeRange {
    std::int64_t w_min, w_max, h_min, h_max;
};

SizeRange size_for(const std::string& category) {
    if (category == "person") return {16, 36, 32, 72};
    if (category == "motorcycle") return {20, 44, 20, 44};
    if (category == "car") return {40, 90, 28, 60};
    if (category == "truck" || category == "bus") return {56, 120, 40, 90};
    if (category == "airplane") return {80, 180, 50, 120};
    return {24, 64, 24, 64};
}

std::string pick_category(const std::map<std::string, double>& mix, Rng& rng) {
    double total = 0;
    for (const auto& [category, weight] : mix) {
        (void)category;
        if (weight < 0) throw Error("ConfigError", "category weight must be >= 0");
        total += weight;
    }
    if (mix.empty() || total <= 0) {
        throw Error("ConfigError", "category mix must carry positive weight");
    }
    const double target = rng.uniform() * total;
    double acc = 0;
    for (const auto& [category, weight] : mix) {
        acc += weight;
        if (target < acc) return category;
    }
    return mix.rbegin()->first; // target == total under rounding
}

bool overlaps(const sls::BoundingBox& a, const sls::BoundingBox& b) {
    return !(a.x_max <= b.x_min || b.x_max <= a.x_min || a.y_max <= b.y_min ||
             b.y_max <= a.y_min);
}

constexpr int kPlacementAttempts = 1000;

std::optional<sls::BoundingBox> try_place(const SizeRange& sz, std::int64_t fw, std::int64_t fh,
                                          Rng& rng) {
    if (sz.w_min > fw || sz.h_min > fh) return std::nullopt;
    const auto w = rng.uniform_int(sz.w_min, std::min(sz.w_max, fw));
    const auto h = rng.uniform_int(sz.h_min, std::min(sz.h_max, fh));
    const auto x = rng.uniform_int(0, fw - w);
    const auto y = rng.uniform_int(0, fh - h);
    return sls::BoundingBox{static_cast<double>(x), static_cast<double>(y),
                            static_cast<double>(x + w), static_cast<double>(y + h)};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

const char* kDemandCues[] = {
    "starting live video feed",
    "uploading thermal imagery now",
    "requesting a voice call with command",
    "sending a status update shortly",
    "holding the channel for instructions",
    "keeping radio traffic to a minimum",
};

} // namespace

GroundTruth plant_boxes(const GenerateParams& params, Rng& rng) {
    if (params.n_users < 0) throw Error("ConfigError", "n_users must be >= 0");
    const auto fw = static_cast<std::int64_t>(params.frame_width);
    const auto fh = static_cast<std::int64_t>(params.frame_height);

    GroundTruth gt;
    for (int k = 0; k < params.n_users; ++k) {
        const std::string category = pick_category(params.category_mix, rng);
        const SizeRange sz = size_for(category);
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            auto candidate = try_place(sz, fw, fh, rng);
            if (!candidate) break;
            bool clear = true;
            for (const auto& existing : gt.boxes) {
                if (overlaps(*candidate, existing.box)) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                gt.boxes.push_back({*candidate, category, true});
                placed = true;
            }
        }
        if (!placed) {
            throw Error("PlacementFailure",
                        "no room for box " + std::to_string(k + 1) + " of " +
                            std::to_string(params.n_users) + " after " +
                            std::to_string(kPlacementAttempts) + " attempts");
        }
    }
    return gt;
}

perception::DetectionFrame realize_detections(const GenerateParams& params,
                                              const GroundTruth& gt, Rng& rng) {
    perception::DetectionFrame fixture;
    fixture.frame_id = params.scenario_id;
    fixture.width = params.frame_width;
    fixture.height = params.frame_height;

    for (const auto& planted : gt.boxes) {
        if (rng.uniform() < params.noise.miss_rate) continue;
        const ConfidenceLaw law = params.noise.law_for(planted.category);
        const double confidence = clamp01(rng.normal(law.mean, law.spread));
        fixture.detections.push_back({planted.category, confidence, planted.box});
    }

    const auto fw = static_cast<std::int64_t>(params.frame_width);
    const auto fh = static_cast<std::int64_t>(params.frame_height);
    const std::int64_t spurious = rng.poisson(params.noise.false_positive_rate);
    for (std::int64_t k = 0; k < spurious; ++k) {
        const std::string category = pick_category(params.category_mix, rng);
        auto box = try_place(size_for(category), fw, fh, rng);
        if (!box) continue;
        const ConfidenceLaw law = params.noise.law_for(category);
        const double confidence = clamp01(rng.normal(law.mean, law.spread));
        fixture.detections.push_back({category, confidence, *box});
    }
    return fixture;
}

sls::Transcript synthesize_transcript(const perception::DetectionFrame& fixture,
                                      const GroundTruth& gt, const PhraseBank& bank, Rng& rng) {
    if (bank.phrases.empty()) throw Error("ConfigError", "phrase bank is empty");

    // Speakers anchor to user-bearing boxes that survived into the fixture,
    // so spoken positions always reference something the detector reported.
    std::vector<sls::RelativePoint> anchors;
    for (const auto& det : fixture.detections) {
        for (const auto& planted : gt.boxes) {
            if (!planted.user_bearing) continue;
            if (det.category == planted.category && det.box.x_min == planted.box.x_min &&
                det.box.y_min == planted.box.y_min && det.box.x_max == planted.box.x_max &&
                det.box.y_max == planted.box.y_max) {
                anchors.push_back(
                    perception::bbox_center(det.box, fixture.width, fixture.height));
                break;
            }
        }
    }

    sls::Transcript transcript;
    const auto drawn = rng.uniform_int(1, 2);
    if (anchors.empty()) return transcript;
    const auto speakers = std::min<std::int64_t>(drawn, static_cast<std::int64_t>(anchors.size()));

    std::vector<std::size_t> picked;
    const auto first = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(anchors.size()) - 1));
    picked.push_back(first);
    if (speakers == 2) {
        auto second = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(anchors.size()) - 2));
        if (second >= first) ++second;
        picked.push_back(second);
    }

    constexpr std::size_t cue_count = sizeof(kDemandCues) / sizeof(kDemandCues[0]);
    for (std::int64_t s = 0; s < speakers; ++s) {
        const std::string speaker = "speaker_" + std::to_string(s + 1);
        const sls::RelativePoint at = anchors[picked[static_cast<std::size_t>(s)]];
        const auto utterances = rng.uniform_int(1, 2);
        const auto phrase = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(bank.phrases.size()) - 1));
        const auto cue =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cue_count) - 1));
        transcript.utterances.push_back(
            {speaker, bank.phrases[phrase] + ", position " + canonical_number(at.x) + " " +
                          canonical_number(at.y) + ", " + kDemandCues[cue]});
        if (utterances == 2) {
            const auto more = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(bank.phrases.size()) - 1));
            transcript.utterances.push_back({speaker, bank.phrases[more]});
        }
    }
    return transcript;
}

ScenarioManifest generate_scenario(const GenerateParams& params, const PhraseBank& bank,
                                   const std::filesystem::path& out_dir) {
    if (params.scenario_id.empty()) throw Error("ConfigError", "scenario_id must be non-empty");
    if (params.frame_width < 1 || params.frame_height < 1) {
        throw Error("ConfigError", "frame must be at least 1x1");
    }
    params.noise.validate();

    Rng placement_rng(derive_seed(params.seed, 1));
    const GroundTruth gt = plant_boxes(params, placement_rng);

    Rng noise_rng(derive_seed(params.seed, 2));
    const perception::DetectionFrame fixture = realize_detections(params, gt, noise_rng);

    std::filesystem::create_directories(out_dir);
    detail::write_canonical_file(out_dir / "ground_truth.json", gt.to_json());
    detail::write_canonical_file(out_dir / "detections.json", perception::fixture_to_json(fixture));

    nlohmann::json manifest{{"scenario_id", params.scenario_id},
                            {"frame", "detections.json"},
                            {"ground_truth_path", "ground_truth.json"},
                            {"transcript_path", nullptr},
                            {"metadata",
                             {{"seed", std::to_string(params.seed)},
                              {"n_users", params.n_users},
                              {"miss_rate", params.noise.miss_rate},
                              {"false_positive_rate", params.noise.false_positive_rate}}}};
    if (params.with_transcript) {
        Rng transcript_rng(derive_seed(params.seed, 3));
        const sls::Transcript transcript =
            synthesize_transcript(fixture, gt, bank, transcript_rng);
        detail::write_canonical_file(out_dir / "transcript.json", transcript.to_json());
        manifest["transcript_path"] = "transcript.json";
    }
    detail::write_canonical_file(out_dir / "manifest.json", manifest);

    return load_manifest(out_dir);
}

std::vector<ScenarioManifest> generate_dataset(const DatasetParams& params,
                                               const std::filesystem::path& out_dir) {
    if (params.scenarios < 1) throw Error("ConfigError", "dataset needs at least one scenario");
    if (params.users_min < 0 || params.users_max < params.users_min) {
        throw Error("ConfigError", "users range is empty");
    }

    std::vector<ScenarioManifest> manifests;
    manifests.reserve(static_cast<std::size_t>(params.scenarios));
    for (int i = 1; i <= params.scenarios; ++i) {
        char sid[32];
        std::snprintf(sid, sizeof(sid), "scenario_%04d", i);

        GenerateParams sp;
        sp.scenario_id = sid;
        sp.seed = derive_seed(params.seed, static_cast<std::uint64_t>(i));
        Rng pick(derive_seed(sp.seed, 4));
        sp.n_users = static_cast<int>(pick.uniform_int(params.users_min, params.users_max));
        sp.noise.miss_rate = params.miss_rate;
        sp.noise.false_positive_rate = params.false_positive_rate;

        manifests.push_back(generate_scenario(sp, PhraseBank::defaults(), out_dir / sid));
    }
    return manifests;
}

// ---------------------------------------------------------------------------
// Manifest I/O

std::optional<std::filesystem::path> ScenarioManifest::transcript_file() const {
    if (!transcript_path) return std::nullopt;
    return dir / *transcript_path;
}

perception::DetectionFrame ScenarioManifest::load_frame() const {
    return perception::parse_detection_fixture(detail::load_json_file(frame_file()));
}

std::optional<sls::Transcript> ScenarioManifest::load_transcript() const {
    auto file = transcript_file();
    if (!file) return std::nullopt;
    return sls::Transcript::from_json(detail::load_json_file(*file));
}

GroundTruth ScenarioManifest::load_ground_truth() const {
    return GroundTruth::from_json(detail::load_json_file(ground_truth_file()));
}

ScenarioManifest load_manifest(const std::filesystem::path& path) {
    std::filesystem::path manifest_file = path;
    if (std::filesystem::is_directory(path)) {
        manifest_file = path / "manifest.json";
    }
    const nlohmann::json j = detail::load_json_file(manifest_file);

    auto need_string = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) {
            throw Error("ParseError",
                        "manifest field '" + std::string(key) + "' must be a string");
        }
        return j[key].get<std::string>();
    };

    ScenarioManifest m;
    m.scenario_id = need_string("scenario_id");
    m.frame = need_string("frame");
    m.ground_truth_path = need_string("ground_truth_path");
    m.dir = manifest_file.parent_path();
    if (j.contains("transcript_path") && !j["transcript_path"].is_null()) {
        if (!j["transcript_path"].is_string()) {
            throw Error("ParseError", "manifest field 'transcript_path' must be a string or null");
        }
        m.transcript_path = j["transcript_path"].get<std::string>();
    }
    m.metadata = j.contains("metadata") ? j["metadata"] : nlohmann::json::object();

    if (!std::filesystem::exists(m.frame_file())) {
        throw Error("MissingPart", "manifest references absent frame " + m.frame_file().string());
    }
    if (!std::filesystem::exists(m.ground_truth_file())) {
        throw Error("MissingPart",
                    "manifest references absent ground truth " + m.ground_truth_file().string());
    }
    if (auto t = m.transcript_file(); t && !std::filesystem::exists(*t)) {
        throw Error("MissingPart", "manifest references absent transcript " + t->string());
    }
    return m;
}

} // namespace maps::forge
