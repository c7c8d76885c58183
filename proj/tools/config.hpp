#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace gsvin::cli {

/// Reads a JSON or TOML config (chosen by extension: .toml, otherwise JSON).
/// A run manifest is accepted too; its sections sit at the top level like a config file.
nlohmann::json load_config(const std::filesystem::path& path);

/// Section `name` of a config, or an empty object.
nlohmann::json section(const nlohmann::json& config, const std::string& name);

}  // namespace gsvin::cli
