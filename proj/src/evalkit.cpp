#include "maps/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"

namespace maps::evalkit {

double accuracy(std::size_t n_detected, std::size_t n_ground_truth) {
    if (n_ground_truth == 0) {
        if (n_detected > 0) {
            throw Error("UndefinedAccuracy",
                        std::to_string(n_detected) + " detections against empty ground truth");
        }
        return 100.0;
    }
    return 100.0 * static_cast<double>(n_detected) / static_cast<double>(n_ground_truth);
}

double percentile(std::vector<double> samples, double q) {
    if (samples.empty()) throw Error("EmptySamples", "percentile of nothing");
    if (!(q > 0 && q <= 100)) throw Error("ConfigError", "percentile q must be in (0, 100]");
    std::sort(samples.begin(), samples.end());
    const double exact = q * static_cast<double>(samples.size()) / 100.0;
    auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    rank = std::max<std::size_t>(1, std::min(rank, samples.size()));
    return samples[rank - 1];
}

std::vector<CdfPoint> cdf_points(std::vector<double> samples) {
    if (samples.empty()) throw Error("EmptySamples", "cdf of nothing");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    std::vector<CdfPoint> points;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        points.push_back({samples[i], static_cast<double>(i + 1) / n});
    }
    return points;
}

std::string cdf_csv(const std::vector<CdfPoint>& points) {
    std::string out = "seconds,cum_fraction\n";
    for (const auto& p : points) {
        out += canonical_number(p.seconds) + "," + canonical_number(p.cum_fraction) + "\n";
    }
    return out;
}

RunProfile RunProfile::from_stages(std::vector<std::pair<std::string, double>> named) {
    RunProfile profile;
    profile.stages = std::move(named);
    for (const auto& [name, seconds] : profile.stages) {
        (void)name;
        profile.total_seconds += seconds;
    }
    return profile;
}

RunProfile RunProfile::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("stages") || !j["stages"].is_array() ||
        !j.contains("total_seconds") || !j["total_seconds"].is_number()) {
        throw Error("ParseError", "profile must carry stages and total_seconds");
    }
    RunProfile profile;
    double sum = 0;
    for (const auto& js : j["stages"]) {
        if (!js.contains("name") || !js["name"].is_string() || !js.contains("seconds") ||
            !js["seconds"].is_number()) {
            throw Error("ParseError", "malformed profile stage entry");
        }
        profile.stages.emplace_back(js["name"].get<std::string>(), js["seconds"].get<double>());
        sum += profile.stages.back().second;
    }
    profile.total_seconds = j["total_seconds"].get<double>();
    const double scale = std::max(1.0, std::abs(sum));
    if (std::abs(profile.total_seconds - sum) > 1e-9 * scale) {
        throw Error("ParseError", "profile total_seconds disagrees with the stage sum");
    }
    return profile;
}

nlohmann::json RunProfile::to_json() const {
    nlohmann::json jstages = nlohmann::json::array();
    for (const auto& [name, seconds] : stages) {
        jstages.push_back({{"name", name}, {"seconds", seconds}});
    }
    return {{"stages", std::move(jstages)}, {"total_seconds", total_seconds}};
}

std::vector<StageFraction> profile_report(const std::vector<RunProfile>& profiles) {
    if (profiles.empty()) throw Error("EmptySamples", "profile report of nothing");
    const auto& reference = profiles.front().stages;
    std::vector<StageFraction> report(reference.size());
    for (std::size_t s = 0; s < reference.size(); ++s) {
        report[s].stage = reference[s].first;
    }

    for (const auto& profile : profiles) {
        if (profile.stages.size() != reference.size()) {
            throw Error("InconsistentStages", "profiles disagree on stage count");
        }
        double total = 0;
        for (std::size_t s = 0; s < reference.size(); ++s) {
            if (profile.stages[s].first != reference[s].first) {
                throw Error("InconsistentStages",
                            "stage '" + profile.stages[s].first + "' where '" +
                                reference[s].first + "' was expected");
            }
            total += profile.stages[s].second;
        }
        if (total <= 0) {
            throw Error("InconsistentStages", "profile with zero total has no fractions");
        }
        for (std::size_t s = 0; s < reference.size(); ++s) {
            report[s].mean_fraction += profile.stages[s].second / total;
        }
    }
    for (auto& row : report) {
        row.mean_fraction /= static_cast<double>(profiles.size());
    }
    return report;
}

EvaluationRecord evaluate_scenario(const sls::ServiceLevelSpec& spec,
                                   const forge::GroundTruth& gt, const AgentCounts& counts) {
    EvaluationRecord record;
    record.scenario_id = spec.scenario_id;
    record.n_detected = spec.users.size();
    record.n_ground_truth = gt.user_bearing_count();
    record.accuracy_pct = accuracy(record.n_detected, record.n_ground_truth);
    record.per_agent = counts;
    return record;
}

std::string csv_header() {
    return "scenario_id,n_gt,n_detected,accuracy_pct,image_count,audio_count,fused_count,"
           "total_seconds,status";
}

std::string csv_row(const EvaluationRecord& record, double total_seconds,
                    const std::string& status) {
    return record.scenario_id + "," + std::to_string(record.n_ground_truth) + "," +
           std::to_string(record.n_detected) + "," + canonical_number(record.accuracy_pct) + "," +
           std::to_string(record.per_agent.image) + "," + std::to_string(record.per_agent.audio) +
           "," + std::to_string(record.per_agent.fused) + "," + canonical_number(total_seconds) +
           "," + status;
}

} // namespace maps::evalkit
