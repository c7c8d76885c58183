#include "config.hpp"

#include <sstream>

#include <toml.hpp>

#include "gsvin/binio.hpp"
#include "gsvin/errors.hpp"

namespace gsvin::cli {

nlohmann::json load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file '" + path.string() + "' does not exist");
  nlohmann::json j;
  if (path.extension() == ".toml") {
    try {
      const toml::table table = toml::parse_file(path.string());
      std::ostringstream out;
      out << toml::json_formatter{table};
      j = nlohmann::json::parse(out.str());
    } catch (const toml::parse_error& e) {
      throw ValidationError("config " + path.string() + ": " + std::string(e.description()));
    }
  } else {
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config " + path.string() + ": " + e.what());
    }
  }
  if (!j.is_object()) throw ValidationError("config " + path.string() + " must be a table/object");
  return j;
}

nlohmann::json section(const nlohmann::json& config, const std::string& name) {
  if (!config.contains(name)) return nlohmann::json::object();
  const nlohmann::json& s = config.at(name);
  if (!s.is_object()) throw ValidationError("config section '" + name + "' must be a table/object");
  return s;
}

}  // namespace gsvin::cli
