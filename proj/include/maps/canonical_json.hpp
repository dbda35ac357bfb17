#pragma once

#include <string>

#include <json.hpp>

namespace maps {

// Renders v with at most 6 fractional digits, trailing zeros stripped,
// integral values without a decimal point. Throws Error("NonFinite") on
// NaN/inf. "-0" normalizes to "0".
std::string canonical_number(double v);

// Deterministic JSON rendering: object keys in lexicographic order (the
// nlohmann::json default), numbers via canonical_number. indent == 0 gives
// the compact one-line form; indent > 0 a pretty form. Equal trees always
// produce identical bytes, which is what the golden-file tests rely on.
std::string canonical_dump(const nlohmann::json& j, int indent = 0);

} // namespace maps
