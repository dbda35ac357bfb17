#include <doctest.h>

#include <cmath>
#include <set>

#include "maps/canonical_json.hpp"
#include "maps/forge.hpp"
#include "maps/perception.hpp"
#include "test_support.hpp"

using namespace maps::forge;

namespace {

GenerateParams quiet_params(std::uint64_t seed, int n_users) {
    GenerateParams p;
    p.scenario_id = "scenario_test";
    p.seed = seed;
    p.n_users = n_users;
    return p;
}

bool boxes_overlap(const maps::sls::BoundingBox& a, const maps::sls::BoundingBox& b) {
    return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

} // namespace

TEST_CASE("rng is deterministic per seed and stream") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform();
        CHECK(va == b.uniform());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    // A different seed diverges immediately (overwhelmingly likely).
    CHECK(Rng(42).uniform() != c.uniform());
}

TEST_CASE("uniform_int covers its inclusive range without bias artifacts") {
    Rng rng(7);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.uniform_int(5, 45);
        CHECK(v >= 5);
        CHECK(v <= 45);
        seen.insert(v);
    }
    CHECK(seen.size() == 41); // every value reached
    CHECK(rng.uniform_int(3, 3) == 3);
    CHECK_THROWS_AS(rng.uniform_int(5, 4), maps::Error);
}

TEST_CASE("normal and poisson samplers have sane moments") {
    Rng rng(99);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(10.0, 2.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(10.0).epsilon(0.01));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.05));

    double psum = 0;
    for (int i = 0; i < n; ++i) psum += static_cast<double>(rng.poisson(3.0));
    CHECK(psum / n == doctest::Approx(3.0).epsilon(0.05));
    CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("derive_seed yields distinct stable streams") {
    const auto s1 = derive_seed(42, 1);
    const auto s2 = derive_seed(42, 2);
    CHECK(s1 != s2);
    CHECK(s1 != 42);
    CHECK(derive_seed(42, 1) == s1); // pure function
    CHECK(derive_seed(43, 1) != s1);
}

TEST_CASE("ground truth json round trip") {
    GroundTruth gt;
    gt.boxes.push_back({maps::sls::BoundingBox{10, 20, 60, 80}, "person", true});
    gt.boxes.push_back({maps::sls::BoundingBox{100, 100, 220, 160}, "car", false});
    CHECK(gt.user_bearing_count() == 1);

    const auto again = GroundTruth::from_json(gt.to_json());
    REQUIRE(again.boxes.size() == 2);
    CHECK(again.boxes[0].category == "person");
    CHECK(again.boxes[1].user_bearing == false);
    CHECK(again.boxes[1].box.x_max == 220);

    CHECK_THROWS_AS(GroundTruth::from_json(nlohmann::json::array()), maps::Error);
    auto bad = gt.to_json();
    bad["boxes"][0]["box"] = {10, 20, 5, 80}; // inverted
    CHECK_THROWS_AS(GroundTruth::from_json(bad), maps::Error);
}

TEST_CASE("noise model validation") {
    NoiseModel noise;
    noise.miss_rate = 0.25;
    noise.false_positive_rate = 1.5;
    noise.validate();

    noise.miss_rate = -0.1;
    CHECK_THROWS_AS(noise.validate(), maps::Error);
    noise.miss_rate = 1.1;
    CHECK_THROWS_AS(noise.validate(), maps::Error);
    noise.miss_rate = 0;
    noise.false_positive_rate = -1;
    CHECK_THROWS_AS(noise.validate(), maps::Error);

    NoiseModel laws;
    laws.confidence_law["person"] = {0.9, 0.02};
    CHECK(laws.law_for("person").mean == 0.9);
    CHECK(laws.law_for("car").mean == laws.default_confidence.mean);
}

TEST_CASE("planted boxes stay inside the frame and never overlap") {
    auto params = quiet_params(42, 20);
    Rng rng(derive_seed(params.seed, 1));
    const auto gt = plant_boxes(params, rng);
    REQUIRE(gt.boxes.size() == 20);
    CHECK(gt.user_bearing_count() == 20);

    for (size_t i = 0; i < gt.boxes.size(); ++i) {
        const auto& box = gt.boxes[i].box;
        CHECK(box.valid());
        CHECK(box.x_min >= 0);
        CHECK(box.y_min >= 0);
        CHECK(box.x_max <= params.frame_width);
        CHECK(box.y_max <= params.frame_height);
        CHECK(params.category_mix.count(gt.boxes[i].category) == 1);
        for (size_t j = i + 1; j < gt.boxes.size(); ++j) {
            CHECK_FALSE(boxes_overlap(box, gt.boxes[j].box));
        }
    }

    // Zero users is legal and empty.
    auto none = quiet_params(1, 0);
    Rng rng0(1);
    CHECK(plant_boxes(none, rng0).boxes.empty());
}

TEST_CASE("impossible placement raises PlacementFailure") {
    auto params = quiet_params(42, 50);
    params.frame_width = 64;
    params.frame_height = 48; // nowhere near enough room
    Rng rng(derive_seed(params.seed, 1));
    CHECK_THROWS_WITH_AS(plant_boxes(params, rng), doctest::Contains("PlacementFailure"),
                         maps::Error);
}

TEST_CASE("zero-noise realization reproduces every planted box") {
    auto params = quiet_params(42, 15);
    Rng plant_rng(derive_seed(params.seed, 1));
    const auto gt = plant_boxes(params, plant_rng);
    Rng noise_rng(derive_seed(params.seed, 2));
    const auto fixture = realize_detections(params, gt, noise_rng);

    REQUIRE(fixture.detections.size() == 15);
    CHECK(fixture.width == params.frame_width);
    for (size_t i = 0; i < 15; ++i) {
        CHECK(fixture.detections[i].category == gt.boxes[i].category);
        CHECK(fixture.detections[i].box.x_min == gt.boxes[i].box.x_min);
        CHECK(fixture.detections[i].confidence > 0.0);
        CHECK(fixture.detections[i].confidence <= 1.0);
    }
}

TEST_CASE("miss rate thins detections at the binomial rate") {
    // Aggregate over many seeds: the mean survival fraction concentrates
    // around 0.75 with a predictable standard error.
    const double miss = 0.25;
    const int seeds = 300;
    const int n = 20;
    std::size_t survived = 0;
    for (int s = 1; s <= seeds; ++s) {
        auto params = quiet_params(static_cast<std::uint64_t>(s) * 7919, n);
        params.noise.miss_rate = miss;
        Rng plant_rng(derive_seed(params.seed, 1));
        const auto gt = plant_boxes(params, plant_rng);
        Rng noise_rng(derive_seed(params.seed, 2));
        const auto fixture = realize_detections(params, gt, noise_rng);
        CHECK(fixture.detections.size() <= static_cast<std::size_t>(n));
        survived += fixture.detections.size();
    }
    const double total = static_cast<double>(seeds) * n;
    const double rate = static_cast<double>(survived) / total;
    const double se = std::sqrt(miss * (1 - miss) / total);
    CHECK(std::abs(rate - 0.75) < 4 * se);
}

TEST_CASE("false positives follow the configured poisson rate") {
    const double fp = 2.0;
    const int seeds = 200;
    std::size_t extras = 0;
    for (int s = 1; s <= seeds; ++s) {
        auto params = quiet_params(static_cast<std::uint64_t>(s) * 104729, 5);
        params.noise.false_positive_rate = fp;
        Rng plant_rng(derive_seed(params.seed, 1));
        const auto gt = plant_boxes(params, plant_rng);
        Rng noise_rng(derive_seed(params.seed, 2));
        const auto fixture = realize_detections(params, gt, noise_rng);
        REQUIRE(fixture.detections.size() >= 5); // zero miss keeps all
        extras += fixture.detections.size() - 5;
    }
    const double mean_extras = static_cast<double>(extras) / seeds;
    const double se = std::sqrt(fp / seeds);
    CHECK(std::abs(mean_extras - fp) < 4 * se);
}

TEST_CASE("phrase bank ships thirty clean phrases") {
    const auto bank = PhraseBank::defaults();
    CHECK(bank.phrases.size() == 30);
    std::set<std::string> unique(bank.phrases.begin(), bank.phrases.end());
    CHECK(unique.size() == 30);
    for (const auto& phrase : bank.phrases) {
        CHECK_FALSE(phrase.empty());
        // Phrases must not collide with the spoken position-cue grammar.
        CHECK(phrase.find("position ") == std::string::npos);
    }
}

TEST_CASE("transcript speakers anchor to surviving detections") {
    auto params = quiet_params(4242, 12);
    Rng plant_rng(derive_seed(params.seed, 1));
    const auto gt = plant_boxes(params, plant_rng);
    Rng noise_rng(derive_seed(params.seed, 2));
    const auto fixture = realize_detections(params, gt, noise_rng);
    Rng script_rng(derive_seed(params.seed, 3));
    const auto transcript =
        synthesize_transcript(fixture, gt, PhraseBank::defaults(), script_rng);

    REQUIRE_FALSE(transcript.utterances.empty());
    std::set<std::string> speakers;
    for (const auto& u : transcript.utterances) {
        REQUIRE(u.speaker.has_value());
        speakers.insert(*u.speaker);
        CHECK_FALSE(u.text.empty());
    }
    CHECK(speakers.size() >= 1);
    CHECK(speakers.size() <= 2);

    // Every spoken position cue names the exact center of some detection.
    std::set<std::string> centers;
    for (const auto& d : fixture.detections) {
        const auto c = maps::perception::bbox_center(d.box, fixture.width, fixture.height);
        centers.insert(maps::canonical_number(c.x) + " " + maps::canonical_number(c.y));
    }
    size_t cues = 0;
    for (const auto& u : transcript.utterances) {
        const auto at = u.text.find("position ");
        if (at == std::string::npos) continue;
        ++cues;
        auto rest = u.text.substr(at + 9);
        rest = rest.substr(0, rest.find(','));
        CHECK(centers.count(rest) == 1);
    }
    CHECK(cues == speakers.size()); // one placement cue per speaker

    // No surviving detections: the transcript is empty.
    maps::perception::DetectionFrame bare;
    bare.frame_id = "f";
    bare.width = params.frame_width;
    bare.height = params.frame_height;
    Rng empty_rng(derive_seed(params.seed, 3));
    CHECK(synthesize_transcript(bare, gt, PhraseBank::defaults(), empty_rng)
              .utterances.empty());
}

TEST_CASE("generate_scenario writes all four parts deterministically") {
    maps_test::TempDir dir("forge");
    auto params = quiet_params(77, 8);
    params.scenario_id = "scenario_0042";

    const auto manifest = generate_scenario(params, PhraseBank::defaults(), dir / "a");
    CHECK(manifest.scenario_id == "scenario_0042");
    for (const char* part :
         {"manifest.json", "detections.json", "transcript.json", "ground_truth.json"}) {
        CAPTURE(part);
        CHECK(std::filesystem::exists(dir.path() / "a" / part));
    }
    CHECK(manifest.load_frame().detections.size() == 8);
    CHECK(manifest.load_ground_truth().user_bearing_count() == 8);
    CHECK(manifest.load_transcript().has_value());
    CHECK(manifest.metadata["n_users"] == 8);

    // Byte-identical regeneration.
    generate_scenario(params, PhraseBank::defaults(), dir / "b");
    for (const char* part :
         {"manifest.json", "detections.json", "transcript.json", "ground_truth.json"}) {
        CAPTURE(part);
        CHECK(maps_test::read_file(dir.path() / "a" / part) ==
              maps_test::read_file(dir.path() / "b" / part));
    }

    // A different seed changes the realized bytes.
    auto other = params;
    other.seed = 78;
    generate_scenario(other, PhraseBank::defaults(), dir / "c");
    CHECK(maps_test::read_file(dir.path() / "a" / "detections.json") !=
          maps_test::read_file(dir.path() / "c" / "detections.json"));

    // with_transcript=false omits the part and the manifest entry.
    auto silent = params;
    silent.with_transcript = false;
    const auto silent_manifest = generate_scenario(silent, PhraseBank::defaults(), dir / "d");
    CHECK_FALSE(silent_manifest.transcript_path.has_value());
    CHECK_FALSE(std::filesystem::exists(dir.path() / "d" / "transcript.json"));
}

TEST_CASE("dataset generation forges numbered scenario directories") {
    maps_test::TempDir dir("dataset");
    DatasetParams params;
    params.seed = 7;
    params.scenarios = 6;
    params.users_min = 5;
    params.users_max = 9;

    const auto manifests = generate_dataset(params, dir.path());
    REQUIRE(manifests.size() == 6);
    CHECK(manifests.front().scenario_id == "scenario_0001");
    CHECK(manifests.back().scenario_id == "scenario_0006");

    std::set<std::uint64_t> seeds;
    for (const auto& m : manifests) {
        const int n = m.metadata["n_users"].get<int>();
        CHECK(n >= 5);
        CHECK(n <= 9);
        CHECK(static_cast<int>(m.load_frame().detections.size()) == n);
        seeds.insert(std::stoull(m.metadata["seed"].get<std::string>()));
    }
    CHECK(seeds.size() == 6); // per-scenario seeds all differ

    CHECK_THROWS_AS(generate_dataset(DatasetParams{.seed = 1, .scenarios = 0}, dir / "x"),
                    maps::Error);
    CHECK_THROWS_AS(
        generate_dataset(DatasetParams{.seed = 1, .scenarios = 2, .users_min = 9, .users_max = 5},
                         dir / "y"),
        maps::Error);
}

TEST_CASE("load_manifest accepts a directory or file and verifies parts") {
    maps_test::TempDir dir("manifest");
    auto params = quiet_params(5, 3);
    params.scenario_id = "scenario_0001";
    generate_scenario(params, PhraseBank::defaults(), dir / "s");

    const auto by_dir = load_manifest(dir / "s");
    const auto by_file = load_manifest(dir.path() / "s" / "manifest.json");
    CHECK(by_dir.scenario_id == by_file.scenario_id);
    CHECK(by_dir.frame == "detections.json");

    CHECK_THROWS_WITH_AS(load_manifest(dir / "absent"), doctest::Contains("MissingPart"),
                         maps::Error);

    maps_test::write_file(dir.path() / "bad" / "manifest.json", "{not json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "bad"), doctest::Contains("ParseError"),
                         maps::Error);

    // A manifest whose detections file vanished is MissingPart.
    maps_test::write_file(dir.path() / "hollow" / "manifest.json",
                          nlohmann::json{{"scenario_id", "s"},
                                         {"frame", "detections.json"},
                                         {"ground_truth_path", "ground_truth.json"}}
                              .dump());
    CHECK_THROWS_WITH_AS(load_manifest(dir / "hollow"), doctest::Contains("MissingPart"),
                         maps::Error);

    // Wrong field type is ParseError.
    maps_test::write_file(dir.path() / "typed" / "manifest.json",
                          nlohmann::json{{"scenario_id", 42},
                                         {"frame", "detections.json"},
                                         {"ground_truth_path", "ground_truth.json"}}
                              .dump());
    CHECK_THROWS_WITH_AS(load_manifest(dir / "typed"), doctest::Contains("ParseError"),
                         maps::Error);
}
