#include "bibweave/pipeline.hpp"

#include <cstdlib>
#include <fstream>

#include "catch2/catch_amalgamated.hpp"
#include "support/fixtures.hpp"
#include "support/stub_server.hpp"
#include "support/temp_dir.hpp"

using namespace bibweave;
using namespace bibweave::pipeline;
using testsupport::TempDir;

namespace {

struct EnvGuard {
  EnvGuard() { setenv("BIBWEAVE_TEST_KEY", "secret-key", 1); }
};
const EnvGuard kEnvGuard;

const std::vector<std::string> kComparableArtifacts = {
    artifacts::kCandidatesFile, artifacts::kRatingsFile,
    artifacts::kSelectionFile,  artifacts::kRefinedTopMFile,
    artifacts::kRefinedTopTemperatureFile, artifacts::kDedupLogFile,
    artifacts::kMetricsFile,    artifacts::kReportFile,
};

std::string slurp(const std::filesystem::path& path) {
  return artifacts::read_text_file(path);
}

}  // namespace

TEST_CASE("replay run executes every stage and persists the artifacts") {
  TempDir dir("pipe");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);

  const auto manifest = run_pipeline(config);
  for (const auto& stage : stage_names()) {
    CHECK(manifest.stage_status.at(stage) == "done");
  }
  CHECK_FALSE(manifest.run_id.empty());
  for (const auto& name : kComparableArtifacts) {
    CHECK(std::filesystem::exists(config.output_dir / name));
  }

  const auto selection = artifacts::selection_from_json(
      slurp(config.output_dir / artifacts::kSelectionFile));
  CHECK(selection.top_temperature.temperature == 0.8);
  CHECK(selection.top_temperature.chosen ==
        std::vector<std::string>{"cand-0004", "cand-0005"});
  CHECK(selection.top_m.m == 3);
  CHECK(selection.top_m.chosen ==
        std::vector<std::string>{"cand-0005", "cand-0002", "cand-0004"});

  const auto dedup = nlohmann::json::parse(
      slurp(config.output_dir / artifacts::kDedupLogFile));
  CHECK(dedup.at("top_temperature").size() == 1);
  CHECK(dedup.at("top_m").size() == 0);

  const auto metrics_json = nlohmann::json::parse(
      slurp(config.output_dir / artifacts::kMetricsFile));
  REQUIRE(metrics_json.at("rows").size() == 4);
  CHECK(metrics_json.at("rows")[0].at("label") == "Baseline (Individual)");
  CHECK(metrics_json.at("rows")[1].at("label") == "Mean Individual");
  CHECK(metrics_json.at("rows")[2].at("label") == "Top M Responses");
  CHECK(metrics_json.at("rows")[3].at("label") == "Top Temperature");

  const auto report = slurp(config.output_dir / artifacts::kReportFile);
  CHECK(report.find("Avg. Sentence Length") != std::string::npos);
  CHECK(report.find("Delta vs Baseline (Individual)") != std::string::npos);
}

TEST_CASE("two replay runs produce byte-identical artifacts") {
  TempDir dir("pipedet");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);

  auto first = config;
  first.output_dir = dir.path() / "run-a";
  run_pipeline(first);
  auto second = config;
  second.output_dir = dir.path() / "run-b";
  run_pipeline(second);

  for (const auto& name : kComparableArtifacts) {
    INFO(name);
    CHECK(slurp(first.output_dir / name) == slurp(second.output_dir / name));
  }
}

TEST_CASE("an output dir with an existing run is refused") {
  TempDir dir("piperefuse");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);
  run_pipeline(config);
  CHECK_THROWS_AS(run_pipeline(config), ConfigError);
}

TEST_CASE("a failed judge stage resumes without regenerating") {
  TempDir dir("piperesume");
  auto config = testsupport::make_replay_config(dir.path());

  // First fixture: seven judge replies unusable, so judging aborts.
  testsupport::FixtureOptions broken;
  for (std::size_t i = 0; i < 7; ++i) {
    broken.judge_override[i] = "no ratings";
    broken.judge_retry_reply[i] = "still none";
  }
  testsupport::write_replay_fixture(config, broken);

  try {
    run_pipeline(config);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage == "judge");
  }

  const auto manifest_json = nlohmann::json::parse(
      slurp(config.output_dir / artifacts::kManifestFile));
  CHECK(manifest_json.at("stage_status").at("generate") == "done");
  CHECK(manifest_json.at("stage_status").at("judge") == "failed");
  CHECK(manifest_json.at("stage_status").at("select") == "pending");
  const auto candidates_before =
      slurp(config.output_dir / artifacts::kCandidatesFile);

  // Repair the replay file and resume: generation is skipped, the run
  // completes, and the artifacts match a clean run's bytes.
  testsupport::write_replay_fixture(config);
  const auto resumed = resume(config.output_dir);
  for (const auto& stage : stage_names()) {
    CHECK(resumed.stage_status.at(stage) == "done");
  }
  CHECK(slurp(config.output_dir / artifacts::kCandidatesFile) ==
        candidates_before);

  auto clean = config;
  clean.output_dir = dir.path() / "clean";
  run_pipeline(clean);
  for (const auto& name : kComparableArtifacts) {
    INFO(name);
    CHECK(slurp(config.output_dir / name) == slurp(clean.output_dir / name));
  }
}

TEST_CASE("resume of a completed run is a no-op") {
  TempDir dir("pipenoop");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);
  run_pipeline(config);
  const auto before = slurp(config.output_dir / artifacts::kReportFile);
  const auto manifest = resume(config.output_dir);
  CHECK(manifest.all_done());
  CHECK(slurp(config.output_dir / artifacts::kReportFile) == before);
}

TEST_CASE("a tampered config is rejected on resume") {
  TempDir dir("pipetamper");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);
  run_pipeline(config);

  {
    std::ofstream out(config.output_dir / artifacts::kConfigFile,
                      std::ios::app);
    out << "\n";
  }
  CHECK_THROWS_AS(resume(config.output_dir), CorruptManifestError);
  CHECK_THROWS_AS(recompute_metrics(config.output_dir), CorruptManifestError);
}

TEST_CASE("recompute_metrics reproduces the original bytes") {
  TempDir dir("pipemetrics");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);
  run_pipeline(config);
  const auto metrics_before = slurp(config.output_dir / artifacts::kMetricsFile);
  const auto report_before = slurp(config.output_dir / artifacts::kReportFile);

  const auto manifest = recompute_metrics(config.output_dir);
  CHECK(manifest.all_done());
  CHECK(slurp(config.output_dir / artifacts::kMetricsFile) == metrics_before);
  CHECK(slurp(config.output_dir / artifacts::kReportFile) == report_before);
}

TEST_CASE("config errors name the offending field") {
  TempDir dir("pipecfg");
  auto config = testsupport::make_replay_config(dir.path());
  config.judge_profile.clear();
  try {
    run_pipeline(config);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("judge_profile") != std::string::npos);
  }

  config = testsupport::make_replay_config(dir.path());
  config.parallelism = 64;
  CHECK_THROWS_AS(run_pipeline(config), ConfigError);

  config = testsupport::make_replay_config(dir.path());
  config.replay_file.clear();
  CHECK_THROWS_AS(run_pipeline(config), ConfigError);
}

TEST_CASE("config json round trip preserves the run configuration") {
  TempDir dir("pipejson");
  const auto config = testsupport::make_replay_config(dir.path());
  const auto parsed = RunConfig::from_json(config.to_json(), "");
  CHECK(parsed.task.topic == config.task.topic);
  CHECK(parsed.task.sources.size() == config.task.sources.size());
  CHECK(parsed.grid.temperatures == config.grid.temperatures);
  CHECK(parsed.m == config.m);
  CHECK(parsed.similarity_threshold == config.similarity_threshold);
  CHECK(parsed.backend_mode == config.backend_mode);
  CHECK(parsed.profiles.at("judge").model == "stub-judge");
  CHECK(parsed.to_json() == config.to_json());
}

TEST_CASE("missing profile reference in config json is a ConfigError") {
  TempDir dir("pipemissing");
  auto json = testsupport::make_replay_config(dir.path()).to_json();
  json.erase("judge_profile");
  try {
    RunConfig::from_json(json, "");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("judge_profile") != std::string::npos);
  }
}

TEST_CASE("record mode writes one replay line per unique fingerprint") {
  testsupport::StubServer server([](const httplib::Request& request,
                                    httplib::Response& response) {
    const auto body = nlohmann::json::parse(request.body);
    std::string user;
    for (const auto& message : body.at("messages")) {
      if (message.at("role") == "user") {
        user = message.at("content").get<std::string>();
      }
    }
    std::string content;
    if (user.find("Rate the annotated bibliography") != std::string::npos) {
      const int score = user.find("marker-high") != std::string::npos ? 9 : 7;
      const std::string s = std::to_string(score);
      content = "Relevance: " + s + "/10\nAccuracy: " + s +
                "/10\nCoherence: " + s + "/10\nOverall: " + s + "/10";
    } else if (user.find("Merge them into one consolidated") !=
               std::string::npos) {
      content =
          "1. Stub, A.; Stub, B. (2020). Combined entry one. Venue.\n"
          "Merged annotation covering the field. Another sentence follows "
          "here.\n"
          "2. Stub, C. (2021). Combined entry two.\n"
          "Second annotation with different words entirely.\n";
    } else {
      const double temperature = body.at("temperature").get<double>();
      content = temperature > 0.5
                    ? "Stub, A. (2020). Entry. This marker-high draft uses "
                      "livelier wording. It praises the survey."
                    : "Stub, A. (2020). Entry. This marker-low draft uses "
                      "plain wording. It reviews the survey.";
    }
    response.set_content(testsupport::chat_response_body(content),
                         "application/json");
  });

  TempDir dir("piperecord");
  auto config = testsupport::make_replay_config(dir.path());
  config.backend_mode = BackendMode::Record;
  config.grid = generation::SweepGrid{{0.2, 0.8}, {40}, {0.95}, 1};
  config.m = 1;
  config.replay_file = dir.path() / "recorded.jsonl";
  for (auto& [name, profile] : config.profiles) {
    profile.base_url = server.base_url();
  }

  run_pipeline(config);

  // 2 generation + 2 judge + 1 summarize (both strategies select the same
  // single candidate, so the summarize request is shared).
  std::ifstream in(config.replay_file);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 5);

  // The recorded file replays into an identical candidates artifact.
  auto replay_config = config;
  replay_config.backend_mode = BackendMode::Replay;
  replay_config.output_dir = dir.path() / "replayed";
  replay_config.cache_dir = dir.path() / "cache2";
  run_pipeline(replay_config);
  CHECK(slurp(replay_config.output_dir / artifacts::kCandidatesFile) ==
        slurp(config.output_dir / artifacts::kCandidatesFile));
  CHECK(slurp(replay_config.output_dir / artifacts::kReportFile) ==
        slurp(config.output_dir / artifacts::kReportFile));
}

TEST_CASE("inspect renders candidates, ratings and selections") {
  TempDir dir("pipeinspect");
  auto config = testsupport::make_replay_config(dir.path());
  testsupport::write_replay_fixture(config);
  run_pipeline(config);

  const auto everything = inspect(config.output_dir);
  CHECK(everything.find("cand-0000") != std::string::npos);
  CHECK(everything.find("top_temperature") != std::string::npos);
  CHECK(everything.find("Avg. Sentence Length") != std::string::npos);

  const auto only_ratings = inspect(config.output_dir, {"ratings"});
  CHECK(only_ratings.find("overall=") != std::string::npos);
  CHECK(only_ratings.find("Avg. Sentence Length") == std::string::npos);
}
