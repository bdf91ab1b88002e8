#pragma once

#include <string>

#include <json.hpp>

#include "jumpepr/model.hpp"

namespace jumpepr {

// Builds a ProcessSpec from a JSON document. Function-valued entries name
// built-in families with parameters; unknown family names raise ConfigError
// with the offending key path.
ProcessSpec load_process_spec(const nlohmann::json& doc);
ProcessSpec load_process_spec_file(const std::string& path);

}  // namespace jumpepr
