#include <fstream>

#include "maps/agents.hpp"
#include "maps/error.hpp"
#include "maps/schema.hpp"

namespace maps::agents {

ReplayModelBackend::ReplayModelBackend(std::filesystem::path root, std::string scenario_id)
    : root_(std::move(root)), scenario_id_(std::move(scenario_id)) {}

GenerationResult ReplayModelBackend::generate_structured(
    const std::string& prompt, const std::vector<Attachment>& attachments,
    const OutputSchema& output_schema) {
    (void)prompt;
    (void)attachments;
    const auto path = root_ / scenario_id_ / (output_schema.name + ".json");
    std::ifstream in(path);
    if (!in) {
        throw Error("MissingPart", "no recorded tree at " + path.string());
    }
    nlohmann::json tree = nlohmann::json::parse(in, nullptr, false);
    if (tree.is_discarded()) {
        throw Error("ParseError", "recorded tree at " + path.string() + " is not valid JSON");
    }
    auto problems = schema::check(tree, output_schema.schema);
    if (!problems.empty()) {
        throw Error("SchemaViolation",
                    "recorded tree at " + path.string() + ": " + problems.front());
    }
    GenerationResult result;
    result.tree = std::move(tree);
    return result;
}

} // namespace maps::agents
