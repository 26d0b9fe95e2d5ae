#pragma once

// gan-forensics command-line driver, callable in-process for tests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ganf/dataset.hpp"
#include "ganf/detector.hpp"
#include "ganf/model.hpp"

namespace ganf::cli {

// Everything a command needs.  The top-level seed feeds training.rng_seed and
// dataset.rng_seed unless a section sets its own value.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  TrainingConfig training;
  SyntheticSpec dataset;
  DetectorConfig detector;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
// Strict: unknown keys and wrongly typed values raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

// Applies "a.b.c=<json>" to a document.  Values that do not parse as JSON
// are taken as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.  Failures
// print {"error": {"kind": ..., "message": ...}} on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ganf::cli
