#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnscape/optimize.hpp"
#include "pinnscape/problems.hpp"

namespace pinnscape::cli {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& subcommands();

/// Complete default document for a subcommand; its keys and value types are
/// the schema that user configs are checked against.
json default_config(const std::string& subcommand, Problem problem, Formulation formulation);

struct RunConfig {
  std::string subcommand;
  json effective;  // defaults merged with the user document
  std::string hash;
  std::uint64_t seed = 0;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;
  double init_scale = 1.0;
  json probe;

  /// <subcommand>-<problem>-<objective>-<first 8 hash digits>
  std::string experiment_id() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig load_config(const std::string& subcommand, const json& user, std::optional<std::uint64_t> seed_override);

OptimizerConfig optimizer_from_json(const json& j);

}  // namespace pinnscape::cli
