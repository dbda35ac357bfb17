#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maps/forge.hpp"
#include "maps/sls.hpp"

namespace maps::evalkit {

struct AgentCounts {
    std::size_t image = 0;
    std::size_t audio = 0;
    std::size_t fused = 0;
};

struct EvaluationRecord {
    std::string scenario_id;
    std::size_t n_detected = 0;
    std::size_t n_ground_truth = 0;
    double accuracy_pct = 0;
    AgentCounts per_agent;
};

// 100 * n_detected / n_ground_truth. May exceed 100 under over-detection.
// (0, 0) counts as a perfect 100.0; detections against an empty ground truth
// raise UndefinedAccuracy.
double accuracy(std::size_t n_detected, std::size_t n_ground_truth);

// Nearest-rank percentile: the ceil(q*n/100)-th smallest sample, q in (0, 100].
double percentile(std::vector<double> samples, double q);

struct CdfPoint {
    double seconds = 0;
    double cum_fraction = 0;
};

// Empirical distribution over sorted unique values; the last fraction is
// exactly 1.0 and fractions strictly increase.
std::vector<CdfPoint> cdf_points(std::vector<double> samples);

// "seconds,cum_fraction" header plus one row per point.
std::string cdf_csv(const std::vector<CdfPoint>& points);

struct RunProfile {
    std::vector<std::pair<std::string, double>> stages; // (name, wall seconds), ordered
    double total_seconds = 0;

    static RunProfile from_stages(std::vector<std::pair<std::string, double>> stages);
    static RunProfile from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct StageFraction {
    std::string stage;
    double mean_fraction = 0;
};

// Per-stage mean of per-run time fractions. Requires at least one profile
// and an identical stage sequence everywhere (InconsistentStages otherwise);
// the fractions sum to 1 within 1e-9.
std::vector<StageFraction> profile_report(const std::vector<RunProfile>& profiles);

EvaluationRecord evaluate_scenario(const sls::ServiceLevelSpec& spec,
                                   const forge::GroundTruth& gt, const AgentCounts& counts);

std::string csv_header();
std::string csv_row(const EvaluationRecord& record, double total_seconds,
                    const std::string& status = "ok");

} // namespace maps::evalkit
