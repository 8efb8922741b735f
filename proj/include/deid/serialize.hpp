#pragma once

// Canonical JSON forms of the core types.

#include "deid/core.hpp"

#include <json.hpp>

namespace deid {

nlohmann::json span_to_json(const EntitySpan& span);
EntitySpan span_from_json(const nlohmann::json& j);

nlohmann::json spans_to_json(const std::vector<EntitySpan>& spans);
std::vector<EntitySpan> spans_from_json(const nlohmann::json& j);

/// Throws Error{InvalidSettings} on unknown types, bad actions or out of
/// range values.
nlohmann::json settings_to_json(const DeidSettings& s);
DeidSettings settings_from_json(const nlohmann::json& j);

nlohmann::json masked_to_json(const MaskedDocument& m);
MaskedDocument masked_from_json(const nlohmann::json& j);

/// Stable textual dump used for files written to disk (2-space indent,
/// trailing newline).
std::string dump_pretty(const nlohmann::json& j);

}  // namespace deid
