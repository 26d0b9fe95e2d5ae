#include "ganf/config_json.hpp"

#include <initializer_list>

namespace ganf {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer() || (std::is_unsigned_v<T> && it->get<long long>() < 0)) {
        throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    }
    out = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + "." + key + ": wrong value type (" + it->dump() + ")");
  }
}

}  // namespace

json to_json(const GeneratorConfig& c) {
  return {{"base_channels", c.base_channels},
          {"n_downsamples", c.n_downsamples},
          {"n_residual_blocks", c.n_residual_blocks},
          {"image_size", c.image_size},
          {"artifact_free", c.artifact_free}};
}

json to_json(const DiscriminatorConfig& c) {
  return {{"base_channels", c.base_channels}, {"depth", c.depth}, {"image_size", c.image_size}};
}

json to_json(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"cycle_weight", c.cycle_weight},
          {"identity_weight", c.identity_weight}, {"batch_size", c.batch_size},
          {"total_steps", c.total_steps},     {"rng_seed", c.rng_seed}};
}

json to_json(const SyntheticSpec& c) {
  return {{"image_size", c.image_size}, {"n_train", c.n_train}, {"n_test", c.n_test},
          {"grain_stddev", c.grain_stddev}, {"rng_seed", c.rng_seed}};
}

json to_json(const DetectorConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"iterations", c.iterations}, {"l2", c.l2}};
}

void from_json(const json& j, GeneratorConfig& c, const std::string& where) {
  check_keys(j, where, {"base_channels", "n_downsamples", "n_residual_blocks", "image_size", "artifact_free"});
  read(j, "base_channels", c.base_channels, where);
  read(j, "n_downsamples", c.n_downsamples, where);
  read(j, "n_residual_blocks", c.n_residual_blocks, where);
  read(j, "image_size", c.image_size, where);
  read(j, "artifact_free", c.artifact_free, where);
}

void from_json(const json& j, DiscriminatorConfig& c, const std::string& where) {
  check_keys(j, where, {"base_channels", "depth", "image_size"});
  read(j, "base_channels", c.base_channels, where);
  read(j, "depth", c.depth, where);
  read(j, "image_size", c.image_size, where);
}

void from_json(const json& j, TrainingConfig& c, const std::string& where) {
  check_keys(j, where,
             {"learning_rate", "beta1", "beta2", "cycle_weight", "identity_weight", "batch_size", "total_steps",
              "rng_seed"});
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "beta1", c.beta1, where);
  read(j, "beta2", c.beta2, where);
  read(j, "cycle_weight", c.cycle_weight, where);
  read(j, "identity_weight", c.identity_weight, where);
  read(j, "batch_size", c.batch_size, where);
  read(j, "total_steps", c.total_steps, where);
  read(j, "rng_seed", c.rng_seed, where);
}

void from_json(const json& j, SyntheticSpec& c, const std::string& where) {
  check_keys(j, where, {"image_size", "n_train", "n_test", "grain_stddev", "rng_seed"});
  read(j, "image_size", c.image_size, where);
  read(j, "n_train", c.n_train, where);
  read(j, "n_test", c.n_test, where);
  read(j, "grain_stddev", c.grain_stddev, where);
  read(j, "rng_seed", c.rng_seed, where);
}

void from_json(const json& j, DetectorConfig& c, const std::string& where) {
  check_keys(j, where, {"learning_rate", "iterations", "l2"});
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "iterations", c.iterations, where);
  read(j, "l2", c.l2, where);
}

}  // namespace ganf
