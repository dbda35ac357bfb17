#include "maps/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maps/canonical_json.hpp"
#include "maps/error.hpp"

namespace maps::fusion {

const char* to_string(Mode mode) {
    return mode == Mode::deterministic ? "deterministic" : "model_delegated";
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
    FusionConfig c;
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("escalation_uplift")) c.escalation_uplift = j["escalation_uplift"].get<double>();
    if (j.contains("mode")) {
        const std::string m = j["mode"].get<std::string>();
        if (m == "deterministic") {
            c.mode = Mode::deterministic;
        } else if (m == "model_delegated") {
            c.mode = Mode::model_delegated;
        } else {
            throw Error("ConfigError", "unknown fusion mode '" + m + "'");
        }
    }
    if (!(c.epsilon > 0 && c.epsilon <= std::sqrt(2.0))) {
        throw Error("ConfigError", "epsilon must be in (0, sqrt(2)]");
    }
    if (c.escalation_uplift < 1) {
        throw Error("ConfigError", "escalation_uplift must be >= 1");
    }
    return c;
}

nlohmann::json FusionConfig::to_json() const {
    return {{"epsilon", epsilon},
            {"escalation_uplift", escalation_uplift},
            {"mode", to_string(mode)}};
}

MatchResult match_users(const std::vector<sls::PerceivedUser>& image_users,
                        const std::vector<sls::PerceivedUser>& audio_users,
                        double epsilon) {
    MatchResult result;
    std::vector<bool> image_taken(image_users.size(), false);
    std::vector<bool> audio_taken(audio_users.size(), false);

    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_i = 0, best_a = 0;
        bool found = false;
        for (std::size_t i = 0; i < image_users.size(); ++i) {
            if (image_taken[i] || !image_users[i].position) continue;
            for (std::size_t a = 0; a < audio_users.size(); ++a) {
                if (audio_taken[a] || !audio_users[a].position) continue;
                const double dx = image_users[i].position->x - audio_users[a].position->x;
                const double dy = image_users[i].position->y - audio_users[a].position->y;
                const double d = std::hypot(dx, dy);
                if (d < epsilon && d < best) { // strict <: ties keep the earlier (i, a)
                    best = d;
                    best_i = i;
                    best_a = a;
                    found = true;
                }
            }
        }
        if (!found) break;
        image_taken[best_i] = true;
        audio_taken[best_a] = true;
        result.pairs.emplace_back(best_i, best_a);
    }

    for (std::size_t i = 0; i < image_users.size(); ++i) {
        if (!image_taken[i]) result.unmatched_image.push_back(i);
    }
    for (std::size_t a = 0; a < audio_users.size(); ++a) {
        if (!audio_taken[a]) result.unmatched_audio.push_back(a);
    }
    return result;
}

sls::PerceivedUser merge_pair(const sls::PerceivedUser& image_user,
                              const sls::PerceivedUser& audio_user,
                              const FusionConfig& config) {
    sls::PerceivedUser fused;
    fused.position = image_user.position;
    fused.provenance.image = true;
    fused.provenance.audio = true;
    fused.context = image_user.context + "; " + audio_user.context;

    const int ri = sls::rank(image_user.throughput_level);
    const int ra = sls::rank(audio_user.throughput_level);
    const int medium = sls::rank(sls::ThroughputLevel::medium);
    const int high = sls::rank(sls::ThroughputLevel::high);
    const bool raise = ri >= medium && ra >= medium;
    int level = std::max(ri, ra);
    if (raise) level = std::min(level + 1, high);
    fused.throughput_level = static_cast<sls::ThroughputLevel>(level);

    fused.traffic_demand = std::max(image_user.traffic_demand, audio_user.traffic_demand);
    if (raise) fused.traffic_demand *= config.escalation_uplift;
    return fused;
}

namespace {

void relabel_reading_order(std::vector<sls::PerceivedUser>& users) {
    std::vector<std::size_t> order(users.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        const auto& l = users[lhs];
        const auto& r = users[rhs];
        if (l.position.has_value() != r.position.has_value()) return l.position.has_value();
        if (!l.position) return false; // positionless: keep incoming order
        if (l.position->y != r.position->y) return l.position->y < r.position->y;
        return l.position->x < r.position->x;
    });

    std::vector<sls::PerceivedUser> sorted;
    sorted.reserve(users.size());
    for (std::size_t idx : order) sorted.push_back(std::move(users[idx]));
    users = std::move(sorted);
    for (std::size_t i = 0; i < users.size(); ++i) {
        users[i].label = "user_" + std::to_string(i + 1);
    }
}

} // namespace

std::vector<sls::PerceivedUser> fuse_users(const std::vector<sls::PerceivedUser>& image_users,
                                           const std::vector<sls::PerceivedUser>& audio_users,
                                           const FusionConfig& config) {
    const MatchResult match = match_users(image_users, audio_users, config.epsilon);

    std::vector<sls::PerceivedUser> fused;
    fused.reserve(image_users.size() + audio_users.size());
    std::vector<const sls::PerceivedUser*> partner(image_users.size(), nullptr);
    for (const auto& [i, a] : match.pairs) partner[i] = &audio_users[a];
    for (std::size_t i = 0; i < image_users.size(); ++i) {
        if (partner[i]) {
            fused.push_back(merge_pair(image_users[i], *partner[i], config));
        } else {
            fused.push_back(image_users[i]);
        }
    }
    for (std::size_t a : match.unmatched_audio) fused.push_back(audio_users[a]);

    relabel_reading_order(fused);
    return fused;
}

sls::ServiceLevelSpec fuse(const agents::AgentFragment& image_fragment,
                           const agents::AgentFragment& audio_fragment,
                           const FusionConfig& config,
                           const SlsMeta& meta) {
    sls::ServiceLevelSpec spec;
    spec.scenario_id = meta.scenario_id;
    spec.generated_at = meta.generated_at;
    spec.backend_id = meta.backend_id;
    spec.pipeline_version = meta.pipeline_version;
    spec.users = fuse_users(image_fragment.users, audio_fragment.users, config);
    return spec;
}

namespace {

nlohmann::json fragment_to_json(const agents::AgentFragment& fragment) {
    nlohmann::json users = nlohmann::json::array();
    for (const auto& user : fragment.users) users.push_back(sls::to_json(user));
    return {{"source", fragment.source}, {"users", users}};
}

} // namespace

agents::PromptBundle build_fusion_prompt(const agents::AgentFragment& image_fragment,
                                         const agents::AgentFragment& audio_fragment,
                                         const FusionConfig& config) {
    agents::PromptBundle bundle;
    std::string& text = bundle.text;
    text += "You are merging the findings of an image analyst and an audio analyst into one "
            "coherent user list for network planning.\n";
    text += "Users closer than " + canonical_number(config.epsilon) +
            " (relative frame units) across the two lists describe the same person: merge "
            "them, keep the image position, combine the contexts, and never report more "
            "users than the two lists contain together.\n";
    text += "When both modalities independently indicate at least medium demand, raise the "
            "merged throughput level one step and scale the demand by " +
            canonical_number(config.escalation_uplift) + ".\n";
    text += "Carry per-user provenance (image, audio, or both). Respond only with JSON "
            "conforming to the requested schema.\n";

    bundle.attachments.push_back(
        {"agent_fragment", "", canonical_dump(fragment_to_json(image_fragment))});
    bundle.attachments.push_back(
        {"agent_fragment", "", canonical_dump(fragment_to_json(audio_fragment))});
    bundle.attachments.push_back(
        {"fusion_directives", "",
         canonical_dump({{"epsilon", config.epsilon},
                         {"escalation_uplift", config.escalation_uplift}})});
    return bundle;
}

DelegatedResult fuse_delegated(const agents::AgentFragment& image_fragment,
                               const agents::AgentFragment& audio_fragment,
                               const FusionConfig& config,
                               const SlsMeta& meta,
                               agents::ModelBackend& backend) {
    auto bundle = build_fusion_prompt(image_fragment, audio_fragment, config);
    auto generated = backend.generate_structured(bundle.text, bundle.attachments,
                                                 agents::fusion_agent_schema());
    auto users = agents::parse_fused_users(generated.tree);

    const std::size_t bound = image_fragment.users.size() + audio_fragment.users.size();
    if (users.size() > bound) {
        throw Error("CountBoundViolation",
                    "fusion returned " + std::to_string(users.size()) + " users, inputs carry " +
                        std::to_string(bound));
    }
    relabel_reading_order(users);

    DelegatedResult result;
    result.latency_s = generated.latency_s;
    result.spec.scenario_id = meta.scenario_id;
    result.spec.generated_at = meta.generated_at;
    result.spec.backend_id = meta.backend_id;
    result.spec.pipeline_version = meta.pipeline_version;
    result.spec.users = std::move(users);

    auto check = sls::validate_sls(nlohmann::json::parse(sls::serialize_sls(result.spec)));
    if (!check.ok()) {
        throw Error("SchemaViolation", "fused spec rejected: " + check.errors.front().path +
                                           " " + check.errors.front().detail);
    }
    return result;
}

} // namespace maps::fusion
