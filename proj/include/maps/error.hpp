#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace maps {

// Domain error carrying a stable machine-readable kind ("SchemaViolation",
// "TransportError", ...) next to the human-readable message. The CLI prints
// the kind verbatim in its single-line error output, so kinds are part of
// the external contract and must not be renamed casually.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

} // namespace maps
