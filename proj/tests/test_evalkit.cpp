#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "maps/evalkit.hpp"
#include "test_support.hpp"

using namespace maps::evalkit;

TEST_CASE("accuracy is the detection ratio in percent") {
    CHECK(accuracy(14, 20) == 70.0);
    CHECK(accuracy(20, 20) == 100.0);
    CHECK(accuracy(5, 20) == 25.0);
    CHECK(accuracy(25, 20) == 125.0); // over-detection may exceed 100
    CHECK(accuracy(0, 20) == 0.0);
    CHECK(accuracy(0, 0) == 100.0); // perfect silence on an empty scene
    CHECK_THROWS_WITH_AS(accuracy(3, 0), doctest::Contains("UndefinedAccuracy"), maps::Error);
}

TEST_CASE("accuracy is scale-free") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> d(1, 500);
    std::uniform_int_distribution<std::size_t> k(2, 9);
    for (int i = 0; i < 2000; ++i) {
        const auto det = d(rng), gt = d(rng), scale = k(rng);
        CHECK(accuracy(det * scale, gt * scale) == doctest::Approx(accuracy(det, gt)));
    }
}

TEST_CASE("nearest-rank percentile") {
    const std::vector<double> ten = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile(ten, 90) == 9.0);
    CHECK(percentile(ten, 100) == 10.0);
    CHECK(percentile(ten, 50) == 5.0);
    CHECK(percentile(ten, 10) == 1.0);
    CHECK(percentile(ten, 1) == 1.0);
    CHECK(percentile({3.5}, 90) == 3.5);
    CHECK(percentile({7, 3}, 50) == 3.0);

    // Order of the input is irrelevant.
    std::vector<double> shuffled = ten;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(percentile(shuffled, 90) == 9.0);

    CHECK_THROWS_WITH_AS(percentile({}, 90), doctest::Contains("EmptySamples"), maps::Error);
    CHECK_THROWS_AS(percentile(ten, 0), maps::Error);
    CHECK_THROWS_AS(percentile(ten, 101), maps::Error);
}

TEST_CASE("percentile equals the sort-based oracle and is monotone in q") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> value(0.0, 100.0);
    std::uniform_int_distribution<int> size(1, 60);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> samples(static_cast<size_t>(size(rng)));
        for (auto& s : samples) s = value(rng);

        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        double last = sorted.front();
        for (double q : {5.0, 25.0, 50.0, 75.0, 90.0, 95.0, 100.0}) {
            const auto rank = static_cast<size_t>(
                std::ceil(q * static_cast<double>(sorted.size()) / 100.0 - 1e-9));
            const double oracle = sorted[std::max<size_t>(rank, 1) - 1];
            const double got = percentile(samples, q);
            CHECK(got == oracle);
            CHECK(got >= last); // monotone in q
            last = got;
        }
    }
}

TEST_CASE("cdf points are sorted, unique and end at one") {
    const auto points = cdf_points({2.0, 1.0, 2.0});
    REQUIRE(points.size() == 2);
    CHECK(points[0].seconds == 1.0);
    CHECK(points[0].cum_fraction == doctest::Approx(1.0 / 3.0));
    CHECK(points[1].seconds == 2.0);
    CHECK(points[1].cum_fraction == 1.0);

    const auto single = cdf_points({5.0});
    REQUIRE(single.size() == 1);
    CHECK(single[0].cum_fraction == 1.0);

    CHECK_THROWS_AS(cdf_points({}), maps::Error);

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> value(0.0, 10.0);
    std::uniform_int_distribution<int> size(1, 100);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> samples(static_cast<size_t>(size(rng)));
        for (auto& s : samples) s = value(rng);
        const auto pts = cdf_points(samples);
        CHECK(pts.back().cum_fraction == 1.0);
        for (size_t i = 1; i < pts.size(); ++i) {
            CHECK(pts[i].seconds > pts[i - 1].seconds);
            CHECK(pts[i].cum_fraction > pts[i - 1].cum_fraction);
        }
    }
}

TEST_CASE("cdf csv format") {
    const auto csv = cdf_csv(cdf_points({2.0, 1.0, 2.0}));
    CHECK(csv == "seconds,cum_fraction\n1,0.333333\n2,1\n");
    CHECK(cdf_csv({}) == "seconds,cum_fraction\n");
}

TEST_CASE("run profile sums stages and round-trips json") {
    const auto profile = RunProfile::from_stages(
        {{"perception", 0.5}, {"generate_content.image", 4.0}, {"emit", 0.5}});
    CHECK(profile.total_seconds == 5.0);

    const auto again = RunProfile::from_json(profile.to_json());
    CHECK(again.total_seconds == 5.0);
    REQUIRE(again.stages.size() == 3);
    CHECK(again.stages[1].first == "generate_content.image");

    auto inconsistent = profile.to_json();
    inconsistent["total_seconds"] = 9.0;
    CHECK_THROWS_AS(RunProfile::from_json(inconsistent), maps::Error);
    CHECK_THROWS_AS(RunProfile::from_json(nlohmann::json::array()), maps::Error);
}

TEST_CASE("profile report averages per-run fractions") {
    // Two runs with the same 80/20 split at different absolute scales: the
    // mean fraction is exactly 0.8 / 0.2.
    const auto a = RunProfile::from_stages({{"generate", 8.0}, {"emit", 2.0}});
    const auto b = RunProfile::from_stages({{"generate", 80.0}, {"emit", 20.0}});
    const auto report = profile_report({a, b});
    REQUIRE(report.size() == 2);
    CHECK(report[0].stage == "generate");
    CHECK(report[0].mean_fraction == doctest::Approx(0.8));
    CHECK(report[1].mean_fraction == doctest::Approx(0.2));

    // Different splits average: (0.8 + 0.6) / 2.
    const auto c = RunProfile::from_stages({{"generate", 6.0}, {"emit", 4.0}});
    const auto mixed = profile_report({a, c});
    CHECK(mixed[0].mean_fraction == doctest::Approx(0.7));

    // Fractions always sum to one.
    double sum = 0;
    for (const auto& row : mixed) sum += row.mean_fraction;
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("profile report rejects empty and mismatched inputs") {
    CHECK_THROWS_WITH_AS(profile_report({}), doctest::Contains("EmptySamples"), maps::Error);

    const auto a = RunProfile::from_stages({{"generate", 8.0}, {"emit", 2.0}});
    const auto renamed = RunProfile::from_stages({{"generate", 8.0}, {"send", 2.0}});
    CHECK_THROWS_WITH_AS(profile_report({a, renamed}), doctest::Contains("InconsistentStages"),
                         maps::Error);

    const auto shorter = RunProfile::from_stages({{"generate", 8.0}});
    CHECK_THROWS_AS(profile_report({a, shorter}), maps::Error);

    const auto idle = RunProfile::from_stages({{"generate", 0.0}, {"emit", 0.0}});
    CHECK_THROWS_AS(profile_report({a, idle}), maps::Error);
}

TEST_CASE("scenario evaluation and csv rows") {
    maps::sls::ServiceLevelSpec spec;
    spec.scenario_id = "scenario_0007";
    spec.users.resize(3);

    maps::forge::GroundTruth gt;
    for (int i = 0; i < 4; ++i) {
        gt.boxes.push_back({maps::sls::BoundingBox{10.0 + 100 * i, 10, 60.0 + 100 * i, 60},
                            "person", true});
    }
    gt.boxes.push_back({maps::sls::BoundingBox{900, 10, 960, 60}, "car", false});

    const auto record = evaluate_scenario(spec, gt, AgentCounts{3, 1, 3});
    CHECK(record.scenario_id == "scenario_0007");
    CHECK(record.n_detected == 3);
    CHECK(record.n_ground_truth == 4); // decoys don't count
    CHECK(record.accuracy_pct == 75.0);

    CHECK(csv_header() ==
          "scenario_id,n_gt,n_detected,accuracy_pct,image_count,audio_count,fused_count,"
          "total_seconds,status");
    CHECK(csv_row(record, 1.25) == "scenario_0007,4,3,75,3,1,3,1.25,ok");
    CHECK(csv_row(record, 0.5, "error:TransportError") ==
          "scenario_0007,4,3,75,3,1,3,0.5,error:TransportError");
}
