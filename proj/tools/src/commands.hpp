#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "pinnscape/io.hpp"

namespace pinnscape::cli {

enum class Status { Ok, NonFinite, ProbeFailure };

std::string to_string(Status s);

struct CommandOutcome {
  Status status = Status::Ok;
  std::string message;
  json results = json::object();
};

/// Runs one experiment, writing its data files into `out` (the manifest is
/// written by the caller).
CommandOutcome run_command(const RunConfig& config, io::RunDirectory& out);

}  // namespace pinnscape::cli
