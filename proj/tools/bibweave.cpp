#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bibweave/pipeline.hpp"

// CLI entry point. Exit codes: 0 success, 1 configuration error, 2 stage
// failure (including corrupt manifests).

namespace {

namespace fs = std::filesystem;
using bibweave::ConfigError;
using bibweave::pipeline::BackendMode;
using bibweave::pipeline::RunConfig;
using bibweave::pipeline::RunManifest;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitStageFailure = 2;

void print_manifest(const RunManifest& manifest, const fs::path& run_dir) {
  std::cout << "run " << manifest.run_id << " -> " << run_dir.string() << "\n";
  for (const auto& stage : bibweave::pipeline::stage_names()) {
    auto it = manifest.stage_status.find(stage);
    std::cout << "  " << stage << ": "
              << (it == manifest.stage_status.end() ? "pending" : it->second)
              << "\n";
  }
}

struct RunFlags {
  std::string config_path;
  std::string backend;
  std::string replay_file;
  std::string out_dir;
};

RunConfig load_with_overrides(const RunFlags& flags) {
  RunConfig config = RunConfig::load(flags.config_path);
  if (!flags.backend.empty()) {
    config.backend_mode = bibweave::pipeline::backend_mode_from_name(flags.backend);
  }
  if (!flags.replay_file.empty()) {
    config.replay_file = fs::absolute(flags.replay_file);
  }
  if (!flags.out_dir.empty()) {
    config.output_dir = fs::absolute(flags.out_dir);
  }
  if (!config.output_dir.empty()) {
    config.output_dir = fs::absolute(config.output_dir);
  }
  return config;
}

int run_command(const RunFlags& flags, std::optional<BackendMode> forced_mode) {
  RunConfig config = load_with_overrides(flags);
  if (forced_mode.has_value()) config.backend_mode = *forced_mode;
  const RunManifest manifest = bibweave::pipeline::run_pipeline(config);
  print_manifest(manifest, config.output_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-ensemble annotated bibliography pipeline"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Execute the full pipeline");
  run->add_option("--config", run_flags.config_path, "Path to the run config JSON")
      ->required();
  run->add_option("--backend", run_flags.backend,
                  "Backend mode: live, replay or record")
      ->check(CLI::IsMember({"live", "replay", "record"}));
  run->add_option("--replay-file", run_flags.replay_file,
                  "Replay file to read (replay) or write (record)");
  run->add_option("--out", run_flags.out_dir, "Run directory override");

  RunFlags record_flags;
  auto* record = app.add_subcommand(
      "record", "Live run that also writes a replay file");
  record->add_option("--config", record_flags.config_path,
                     "Path to the run config JSON")
      ->required();
  record->add_option("--replay-file", record_flags.replay_file,
                     "Replay file to write (default <out>/replay.jsonl)");
  record->add_option("--out", record_flags.out_dir, "Run directory override");

  std::string resume_dir;
  auto* resume = app.add_subcommand("resume", "Resume a failed or partial run");
  resume->add_option("run_dir", resume_dir, "Run directory")->required();

  std::string metrics_dir;
  auto* metrics = app.add_subcommand(
      "metrics", "Recompute metrics and report from persisted texts");
  metrics->add_option("run_dir", metrics_dir, "Run directory")->required();

  std::string inspect_dir;
  std::vector<std::string> inspect_stages;
  auto* inspect = app.add_subcommand("inspect",
                                     "Pretty-print a run's artifacts");
  inspect->add_option("run_dir", inspect_dir, "Run directory")->required();
  inspect->add_option("--stage", inspect_stages,
                      "Limit to stages: candidates, ratings, selection, "
                      "metrics, report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) {
      return run_command(run_flags, std::nullopt);
    }
    if (record->parsed()) {
      return run_command(record_flags, BackendMode::Record);
    }
    if (resume->parsed()) {
      const RunManifest manifest = bibweave::pipeline::resume(resume_dir);
      print_manifest(manifest, resume_dir);
      return kExitOk;
    }
    if (metrics->parsed()) {
      const RunManifest manifest =
          bibweave::pipeline::recompute_metrics(metrics_dir);
      print_manifest(manifest, metrics_dir);
      return kExitOk;
    }
    if (inspect->parsed()) {
      std::set<std::string> stages(inspect_stages.begin(),
                                   inspect_stages.end());
      std::cout << bibweave::pipeline::inspect(inspect_dir, stages);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitOk;
}
