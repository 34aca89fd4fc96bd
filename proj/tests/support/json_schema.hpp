#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dempref::test_support {

// Validates against the JSON Schema subset used under docs/schemas: type,
// const, enum, properties, required, additionalProperties (bool),
// items, minItems, maxItems, minimum, maximum, oneOf, anyOf and local
// "$ref": "#/$defs/...". Returns one message per violation.
std::vector<std::string> validate_schema(const nlohmann::json& schema, const nlohmann::json& instance);

// Validates against root["$defs"][name], resolving references within root.
std::vector<std::string> validate_definition(const nlohmann::json& root, const std::string& name,
                                             const nlohmann::json& instance);

}  // namespace dempref::test_support
