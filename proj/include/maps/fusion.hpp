#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maps/agents.hpp"
#include "maps/sls.hpp"

namespace maps::fusion {

enum class Mode { deterministic, model_delegated };

const char* to_string(Mode mode);

struct FusionConfig {
    double epsilon = 0.05;           // duplicate threshold, relative units
    double escalation_uplift = 1.25; // demand multiplier when both modalities press
    Mode mode = Mode::deterministic;

    // {epsilon, escalation_uplift, mode}; missing keys keep defaults.
    static FusionConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct MatchResult {
    std::vector<std::pair<std::size_t, std::size_t>> pairs; // (image idx, audio idx)
    std::vector<std::size_t> unmatched_image;
    std::vector<std::size_t> unmatched_audio;
};

// Greedy closest-first pairing under Euclidean distance < epsilon. Ties break
// toward the lower image index, then the lower audio index. Audio users
// without a position never match.
MatchResult match_users(const std::vector<sls::PerceivedUser>& image_users,
                        const std::vector<sls::PerceivedUser>& audio_users,
                        double epsilon);

// Cross-modal merge: image position wins, contexts concatenate, level is the
// max of the two and is raised one step (capped at high) when both are at
// least medium; demand is the max, multiplied by escalation_uplift when the
// raise fired.
sls::PerceivedUser merge_pair(const sls::PerceivedUser& image_user,
                              const sls::PerceivedUser& audio_user,
                              const FusionConfig& config);

// Match + merge + relabel. Output carries merged pairs and both unmatched
// remainders, labeled "user_1".."user_n" in reading order (by y, then x);
// positionless users go last in audio order.
std::vector<sls::PerceivedUser> fuse_users(const std::vector<sls::PerceivedUser>& image_users,
                                           const std::vector<sls::PerceivedUser>& audio_users,
                                           const FusionConfig& config);

struct SlsMeta {
    std::string scenario_id;
    std::string generated_at;
    std::string backend_id;
    std::string pipeline_version;
};

// Deterministic fusion into a complete spec. The result always passes
// validate_sls.
sls::ServiceLevelSpec fuse(const agents::AgentFragment& image_fragment,
                           const agents::AgentFragment& audio_fragment,
                           const FusionConfig& config,
                           const SlsMeta& meta);

// Serializes both fragments plus the fusion directives for a model call.
agents::PromptBundle build_fusion_prompt(const agents::AgentFragment& image_fragment,
                                         const agents::AgentFragment& audio_fragment,
                                         const FusionConfig& config);

struct DelegatedResult {
    sls::ServiceLevelSpec spec;
    double latency_s = 0;
};

// Model-delegated fusion: the backend output is schema-validated, bounded by
// |image| + |audio| users (CountBoundViolation beyond that), relabeled in
// reading order and re-validated before return.
DelegatedResult fuse_delegated(const agents::AgentFragment& image_fragment,
                               const agents::AgentFragment& audio_fragment,
                               const FusionConfig& config,
                               const SlsMeta& meta,
                               agents::ModelBackend& backend);

} // namespace maps::fusion
