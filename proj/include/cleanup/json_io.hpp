#pragma once

#include "json.hpp"

#include "cleanup/env.hpp"

namespace cleanup::env {

// "map" holds the serialized tile map inline; when reading, "map_name" (a
// built-in map) or "map_file" (a path) are accepted instead. Unlisted keys
// keep the values of the "profile" entry ("agent" or "human", default agent).
void to_json(nlohmann::json& j, const EnvParams& p);
void from_json(const nlohmann::json& j, EnvParams& p);

}  // namespace cleanup::env
