#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/io.hpp"
#include "pinnscape/parallel.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pinnscape;

enum Exit : int { kOk = 0, kInternal = 1, kUsage = 2, kNonFinite = 3, kProbeFailure = 4 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw cli::ConfigError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw cli::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-landscape probes for physics-informed networks", "pinnscape"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  unsigned threads = 1;
  app.add_option("--config", config_path, "JSON experiment config (defaults apply when omitted)");
  app.add_option("--seed", seed, "Seed, overriding the config");
  app.add_option("--out", out_dir, "Parent directory for run directories")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.fallthrough();
  app.require_subcommand(1, 1);
  for (const auto& name : cli::subcommands()) app.add_subcommand(name, "Run the " + name + " experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  cli::RunConfig rc;
  std::optional<io::RunDirectory> run;
  try {
    rc = cli::load_config(sub, read_config(config_path), seed);
    run.emplace(fs::path(out_dir) / rc.experiment_id());
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  set_thread_count(threads);
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  cli::CommandOutcome outcome;
  try {
    outcome = cli::run_command(rc, *run);
  } catch (const NonFiniteObjective& e) {
    std::cerr << "non-finite objective: " << e.what() << '\n';
    return kNonFinite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json manifest = {{"tool", "pinnscape"},
                   {"tool_version", PINNSCAPE_VERSION},
                   {"experiment_id", rc.experiment_id()},
                   {"subcommand", sub},
                   {"seed", rc.seed},
                   {"config_hash", rc.hash},
                   {"config", rc.effective},
                   {"status", cli::to_string(outcome.status)},
                   {"message", outcome.message},
                   {"results", outcome.results},
                   {"timing_file", "timing.json"}};
  try {
    run->commit(std::move(manifest));
    std::ofstream timing(run->target() / "timing.json");
    timing << json{{"schema_version", io::kSchemaVersion},
                   {"started_utc", started},
                   {"finished_utc", utc_now()},
                   {"wall_seconds", wall},
                   {"threads", thread_count()}}
                  .dump(2)
           << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }

  std::cout << run->target().string() << ' ' << cli::to_string(outcome.status) << '\n';
  if (!outcome.message.empty()) std::cerr << outcome.message << '\n';
  switch (outcome.status) {
    case cli::Status::Ok: return kOk;
    case cli::Status::NonFinite: return kNonFinite;
    case cli::Status::ProbeFailure: return kProbeFailure;
  }
  return kInternal;
}
