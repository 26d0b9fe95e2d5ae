#pragma once

// JSON mappings for the configuration structs.  Parsing is strict: unknown
// keys and wrong value types raise ConfigError; missing keys keep defaults.

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ganf/dataset.hpp"
#include "ganf/detector.hpp"
#include "ganf/model.hpp"

namespace ganf {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
nlohmann::json to_json(const TrainingConfig& c);
nlohmann::json to_json(const SyntheticSpec& c);
nlohmann::json to_json(const DetectorConfig& c);

// `where` names the section in error messages.
void from_json(const nlohmann::json& j, GeneratorConfig& c, const std::string& where = "generator");
void from_json(const nlohmann::json& j, DiscriminatorConfig& c, const std::string& where = "discriminator");
void from_json(const nlohmann::json& j, TrainingConfig& c, const std::string& where = "training");
void from_json(const nlohmann::json& j, SyntheticSpec& c, const std::string& where = "dataset");
void from_json(const nlohmann::json& j, DetectorConfig& c, const std::string& where = "detector");

}  // namespace ganf
