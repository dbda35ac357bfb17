#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace maps::schema {

// Small structural checker for the schema subset the backends exchange:
//   type ("object"|"array"|"string"|"number"|"integer"|"boolean"|"null",
//         or an array of those), properties/required, items, enum,
//         minimum/maximum.
// Returns one problem string per violation, empty when value conforms.
std::vector<std::string> check(const nlohmann::json& value,
                               const nlohmann::json& schema,
                               const std::string& path = "$");

bool conforms(const nlohmann::json& value, const nlohmann::json& schema);

} // namespace maps::schema
