#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "rowfollow/simulation.hpp"

namespace rowfollow {

/// Full default trial configuration as JSON (the documented schema).
nlohmann::json defaultConfigJson();

nlohmann::json configToJson(const TrialConfig& cfg);

/// Parses a configuration document. Unknown keys and schema violations
/// throw ConfigInvalid.
TrialConfig configFromJson(const nlohmann::json& doc);

/// Applies a dotted-path override "a.b.c=value" onto a config document.
/// The path must exist in the schema; the value is parsed as JSON when
/// possible, else taken as a string. Throws ConfigInvalid on unknown keys.
void applyOverride(nlohmann::json& doc, const std::string& keyValue);

/// Loads a config file and applies overrides in order (last wins).
TrialConfig loadTrialConfig(const std::string& path,
                            const std::vector<std::string>& overrides = {});

}  // namespace rowfollow
