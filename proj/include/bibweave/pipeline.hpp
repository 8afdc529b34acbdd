#ifndef BIBWEAVE_PIPELINE_HPP
#define BIBWEAVE_PIPELINE_HPP

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bibweave/artifacts.hpp"
#include "bibweave/detail/digest.hpp"
#include "bibweave/errors.hpp"
#include "bibweave/generation.hpp"
#include "bibweave/judging.hpp"
#include "bibweave/metrics.hpp"
#include "bibweave/provider_http.hpp"
#include "bibweave/refinement.hpp"
#include "bibweave/selection.hpp"

// Pipeline orchestration: configuration loading, staged execution with a
// persisted manifest, and resume. Stages run in a fixed order and each
// stage's artifact is written before the next begins, so a failed run can
// be resumed from the first non-done stage.

namespace bibweave::pipeline {

class StageError : public Error {
 public:
  StageError(std::string stage_in, const std::string& cause)
      : Error("stage \"" + stage_in + "\" failed: " + cause),
        stage(std::move(stage_in)) {}

  std::string stage;
};

class CorruptManifestError : public Error {
 public:
  explicit CorruptManifestError(const std::string& detail)
      : Error("corrupt run manifest: " + detail) {}
};

enum class BackendMode { Live, Replay, Record };

inline const char* backend_mode_name(BackendMode mode) {
  switch (mode) {
    case BackendMode::Live: return "live";
    case BackendMode::Replay: return "replay";
    case BackendMode::Record: return "record";
  }
  return "live";
}

inline BackendMode backend_mode_from_name(const std::string& name) {
  if (name == "live") return BackendMode::Live;
  if (name == "replay") return BackendMode::Replay;
  if (name == "record") return BackendMode::Record;
  throw ConfigError("backend_mode must be live, replay or record, got \"" +
                    name + "\"");
}

struct MaxTokens {
  int generation = 1024;
  int judging = 256;
  int summarization = 1024;
};

struct RunConfig {
  generation::BibliographyTask task;
  generation::SweepGrid grid = generation::default_grid();
  std::map<std::string, provider::ProviderProfile> profiles;
  std::string generator_profile;
  std::string judge_profile;
  std::string summarizer_profile;
  judging::JudgeRubric rubric = judging::default_rubric();
  int m = 3;
  double similarity_threshold = 0.8;
  std::size_t parallelism = 4;
  double summarizer_temperature = 0.3;
  MaxTokens max_tokens;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::filesystem::path replay_file;
  BackendMode backend_mode = BackendMode::Live;

  const provider::ProviderProfile& profile_for(const std::string& field,
                                               const std::string& name) const {
    if (name.empty()) throw ConfigError("config is missing field " + field);
    auto it = profiles.find(name);
    if (it == profiles.end()) {
      throw ConfigError(field + " references undefined profile \"" + name +
                        "\"");
    }
    return it->second;
  }

  const provider::ProviderProfile& generator() const {
    return profile_for("generator_profile", generator_profile);
  }
  const provider::ProviderProfile& judge() const {
    return profile_for("judge_profile", judge_profile);
  }
  const provider::ProviderProfile& summarizer() const {
    return profile_for("summarizer_profile", summarizer_profile);
  }

  void validate() const {
    task.validate();
    grid.validate();
    rubric.validate();
    for (const auto& [name, profile] : profiles) profile.validate();
    generator().validate();
    judge().validate();
    summarizer().validate();
    if (m < 1) throw ConfigError("m must be >= 1");
    if (!(similarity_threshold > 0.0) || similarity_threshold > 1.0) {
      throw ConfigError("similarity_threshold must be in (0, 1]");
    }
    if (parallelism < 1 || parallelism > 32) {
      throw ConfigError("parallelism must be in [1, 32]");
    }
    if (summarizer_temperature < 0.0 || summarizer_temperature > 2.0) {
      throw ConfigError("summarizer_temperature must be in [0, 2]");
    }
    if (max_tokens.generation < 1 || max_tokens.judging < 1 ||
        max_tokens.summarization < 1) {
      throw ConfigError("max_tokens values must be positive");
    }
    if (output_dir.empty()) throw ConfigError("config is missing output_dir");
    if (backend_mode == BackendMode::Replay && replay_file.empty()) {
      throw ConfigError("replay backend requires replay_file");
    }
  }

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::ordered_json& in,
                             const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& file);
};

namespace detail {

template <typename Json>
const Json& require_field(const Json& obj, const std::string& field,
                          const std::string& context) {
  if (!obj.contains(field)) {
    throw ConfigError("config is missing field " +
                      (context.empty() ? field : context + "." + field));
  }
  return obj.at(field);
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base,
                                          const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace detail

inline nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json out;

  nlohmann::ordered_json task_json;
  task_json["topic"] = task.topic;
  if (!task.sources.empty()) {
    nlohmann::ordered_json sources = nlohmann::ordered_json::array();
    for (const auto& source : task.sources) {
      nlohmann::ordered_json s;
      s["authors"] = source.authors;
      s["title"] = source.title;
      s["year"] = source.year;
      if (source.venue.has_value()) s["venue"] = *source.venue;
      if (source.identifier.has_value()) s["identifier"] = *source.identifier;
      sources.push_back(std::move(s));
    }
    task_json["sources"] = std::move(sources);
  }
  task_json["entry_count"] = task.entry_count;
  if (!task.style_notes.empty()) task_json["style_notes"] = task.style_notes;
  task_json["annotation_sentences"] = task.annotation_sentences;
  out["task"] = std::move(task_json);

  nlohmann::ordered_json grid_json;
  grid_json["temperatures"] = grid.temperatures;
  nlohmann::ordered_json top_ks = nlohmann::ordered_json::array();
  for (const auto& k : grid.top_ks) {
    if (k.has_value()) {
      top_ks.push_back(*k);
    } else {
      top_ks.push_back(nullptr);
    }
  }
  grid_json["top_ks"] = std::move(top_ks);
  grid_json["top_ps"] = grid.top_ps;
  grid_json["repeats"] = grid.repeats;
  out["grid"] = std::move(grid_json);

  nlohmann::ordered_json profiles_json;
  for (const auto& [name, profile] : profiles) {
    nlohmann::ordered_json p;
    p["base_url"] = profile.base_url;
    p["model"] = profile.model;
    p["api_key_env"] = profile.api_key_env;
    p["supports_top_k"] = profile.supports_top_k;
    p["max_retries"] = profile.max_retries;
    p["timeout_seconds"] = profile.timeout_seconds;
    profiles_json[name] = std::move(p);
  }
  out["profiles"] = std::move(profiles_json);
  out["generator_profile"] = generator_profile;
  out["judge_profile"] = judge_profile;
  out["summarizer_profile"] = summarizer_profile;

  nlohmann::ordered_json rubric_json;
  nlohmann::ordered_json criteria = nlohmann::ordered_json::array();
  for (const auto& criterion : rubric.criteria) {
    criteria.push_back(nlohmann::ordered_json{{"name", criterion.name},
                                              {"weight", criterion.weight}});
  }
  rubric_json["criteria"] = std::move(criteria);
  rubric_json["scale_min"] = rubric.scale_min;
  rubric_json["scale_max"] = rubric.scale_max;
  out["rubric"] = std::move(rubric_json);

  out["m"] = m;
  out["similarity_threshold"] = similarity_threshold;
  out["parallelism"] = parallelism;
  out["summarizer_temperature"] = summarizer_temperature;
  out["max_tokens"] = nlohmann::ordered_json{{"generation", max_tokens.generation},
                                             {"judging", max_tokens.judging},
                                             {"summarization", max_tokens.summarization}};
  out["cache_dir"] = cache_dir.generic_string();
  out["output_dir"] = output_dir.generic_string();
  out["backend_mode"] = backend_mode_name(backend_mode);
  if (!replay_file.empty()) out["replay_file"] = replay_file.generic_string();
  return out;
}

inline RunConfig RunConfig::from_json(const nlohmann::ordered_json& in,
                                      const std::filesystem::path& base_dir) {
  RunConfig config;

  const auto& task_json = detail::require_field(in, "task", "");
  config.task.topic =
      detail::require_field(task_json, "topic", "task").get<std::string>();
  if (task_json.contains("sources")) {
    for (const auto& s : task_json.at("sources")) {
      generation::SourceEntry source;
      for (const auto& author : detail::require_field(s, "authors", "source")) {
        source.authors.push_back(author.get<std::string>());
      }
      source.title = detail::require_field(s, "title", "source").get<std::string>();
      source.year = detail::require_field(s, "year", "source").get<int>();
      if (s.contains("venue")) source.venue = s.at("venue").get<std::string>();
      if (s.contains("identifier")) {
        source.identifier = s.at("identifier").get<std::string>();
      }
      config.task.sources.push_back(std::move(source));
    }
  }
  if (task_json.contains("entry_count")) {
    config.task.entry_count = task_json.at("entry_count").get<int>();
  } else if (!config.task.sources.empty()) {
    config.task.entry_count = static_cast<int>(config.task.sources.size());
  } else {
    throw ConfigError("config is missing field task.entry_count");
  }
  if (task_json.contains("style_notes")) {
    config.task.style_notes = task_json.at("style_notes").get<std::string>();
  }
  if (task_json.contains("annotation_sentences")) {
    config.task.annotation_sentences =
        task_json.at("annotation_sentences").get<int>();
  }

  if (in.contains("grid")) {
    const auto& grid_json = in.at("grid");
    config.grid.temperatures.clear();
    for (const auto& t : detail::require_field(grid_json, "temperatures", "grid")) {
      config.grid.temperatures.push_back(t.get<double>());
    }
    config.grid.top_ks.clear();
    if (grid_json.contains("top_ks")) {
      for (const auto& k : grid_json.at("top_ks")) {
        if (k.is_null()) {
          config.grid.top_ks.push_back(std::nullopt);
        } else {
          config.grid.top_ks.push_back(k.get<int>());
        }
      }
    }
    if (config.grid.top_ks.empty()) config.grid.top_ks = {std::nullopt};
    config.grid.top_ps.clear();
    for (const auto& p : detail::require_field(grid_json, "top_ps", "grid")) {
      config.grid.top_ps.push_back(p.get<double>());
    }
    config.grid.repeats =
        grid_json.contains("repeats") ? grid_json.at("repeats").get<int>() : 1;
  }

  const auto& profiles_json = detail::require_field(in, "profiles", "");
  for (const auto& [name, p] : profiles_json.items()) {
    provider::ProviderProfile profile;
    profile.name = name;
    profile.base_url =
        detail::require_field(p, "base_url", "profiles." + name).get<std::string>();
    profile.model =
        detail::require_field(p, "model", "profiles." + name).get<std::string>();
    if (p.contains("api_key_env")) {
      profile.api_key_env = p.at("api_key_env").get<std::string>();
    }
    if (p.contains("supports_top_k")) {
      profile.supports_top_k = p.at("supports_top_k").get<bool>();
    }
    if (p.contains("max_retries")) {
      profile.max_retries = p.at("max_retries").get<int>();
    }
    if (p.contains("timeout_seconds")) {
      profile.timeout_seconds = p.at("timeout_seconds").get<double>();
    }
    config.profiles[name] = std::move(profile);
  }
  config.generator_profile =
      detail::require_field(in, "generator_profile", "").get<std::string>();
  config.judge_profile =
      detail::require_field(in, "judge_profile", "").get<std::string>();
  config.summarizer_profile =
      detail::require_field(in, "summarizer_profile", "").get<std::string>();

  if (in.contains("rubric")) {
    const auto& rubric_json = in.at("rubric");
    config.rubric.criteria.clear();
    for (const auto& c : detail::require_field(rubric_json, "criteria", "rubric")) {
      config.rubric.criteria.push_back(judging::JudgeCriterion{
          detail::require_field(c, "name", "criterion").get<std::string>(),
          detail::require_field(c, "weight", "criterion").get<double>()});
    }
    if (rubric_json.contains("scale_min")) {
      config.rubric.scale_min = rubric_json.at("scale_min").get<int>();
    }
    if (rubric_json.contains("scale_max")) {
      config.rubric.scale_max = rubric_json.at("scale_max").get<int>();
    }
  }

  if (in.contains("m")) config.m = in.at("m").get<int>();
  if (in.contains("similarity_threshold")) {
    config.similarity_threshold = in.at("similarity_threshold").get<double>();
  }
  if (in.contains("parallelism")) {
    config.parallelism = in.at("parallelism").get<std::size_t>();
  }
  if (in.contains("summarizer_temperature")) {
    config.summarizer_temperature = in.at("summarizer_temperature").get<double>();
  }
  if (in.contains("max_tokens")) {
    const auto& mt = in.at("max_tokens");
    if (mt.contains("generation")) {
      config.max_tokens.generation = mt.at("generation").get<int>();
    }
    if (mt.contains("judging")) {
      config.max_tokens.judging = mt.at("judging").get<int>();
    }
    if (mt.contains("summarization")) {
      config.max_tokens.summarization = mt.at("summarization").get<int>();
    }
  }

  if (in.contains("output_dir")) {
    config.output_dir =
        detail::resolve_path(base_dir, in.at("output_dir").get<std::string>());
  }
  if (in.contains("cache_dir")) {
    config.cache_dir =
        detail::resolve_path(base_dir, in.at("cache_dir").get<std::string>());
  }
  if (in.contains("replay_file")) {
    config.replay_file =
        detail::resolve_path(base_dir, in.at("replay_file").get<std::string>());
  }
  if (in.contains("backend_mode")) {
    config.backend_mode =
        backend_mode_from_name(in.at("backend_mode").get<std::string>());
  }
  return config;
}

inline RunConfig RunConfig::load(const std::filesystem::path& file) {
  nlohmann::ordered_json parsed;
  try {
    parsed = nlohmann::ordered_json::parse(artifacts::read_text_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config " + file.string() + ": " + e.what());
  }
  const auto base_dir = std::filesystem::absolute(file).parent_path();
  try {
    return from_json(parsed, base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
}

// --- manifest -----------------------------------------------------------

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> kStages = {
      "generate", "judge", "select", "refine", "metrics", "report"};
  return kStages;
}

struct RunManifest {
  std::string run_id;
  std::string config_digest;
  std::map<std::string, std::string> stage_status;   // stage -> pending/done/failed
  std::map<std::string, std::string> artifact_paths; // name -> path in run dir

  bool all_done() const {
    for (const auto& stage : stage_names()) {
      auto it = stage_status.find(stage);
      if (it == stage_status.end() || it->second != "done") return false;
    }
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json out;
    out["run_id"] = run_id;
    out["config_digest"] = config_digest;
    nlohmann::ordered_json status;
    for (const auto& stage : stage_names()) {
      auto it = stage_status.find(stage);
      status[stage] = it == stage_status.end() ? "pending" : it->second;
    }
    out["stage_status"] = std::move(status);
    nlohmann::ordered_json paths;
    for (const auto& [name, path] : artifact_paths) paths[name] = path;
    out["artifact_paths"] = std::move(paths);
    return out;
  }

  static RunManifest from_json(const nlohmann::json& in) {
    RunManifest manifest;
    try {
      manifest.run_id = in.at("run_id").get<std::string>();
      manifest.config_digest = in.at("config_digest").get<std::string>();
      for (const auto& [stage, status] : in.at("stage_status").items()) {
        manifest.stage_status[stage] = status.get<std::string>();
      }
      for (const auto& [name, path] : in.at("artifact_paths").items()) {
        manifest.artifact_paths[name] = path.get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorruptManifestError(e.what());
    }
    return manifest;
  }
};

namespace detail {

inline std::string make_run_id() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  static const char kHex[] = "0123456789abcdef";
  std::mt19937_64 rng{std::random_device{}()};
  std::string suffix;
  for (int i = 0; i < 4; ++i) suffix.push_back(kHex[rng() % 16]);
  return std::string(stamp) + "-" + suffix;
}

}  // namespace detail

// --- execution ------------------------------------------------------------

namespace detail {

// Heap-held members keep the addresses the completers point at stable when
// a Backends value moves.
struct Backends {
  std::unique_ptr<provider::ReplayStore> store;
  std::unique_ptr<provider::ResponseCache> cache;
  std::unique_ptr<provider::ReplayWriter> writer;
  std::vector<std::unique_ptr<provider::Completer>> owned;
  provider::Completer* generator = nullptr;
  provider::Completer* judge = nullptr;
  provider::Completer* summarizer = nullptr;
};

inline Backends make_backends(const RunConfig& config) {
  Backends backends;
  auto attach = [&backends](std::unique_ptr<provider::Completer> completer) {
    backends.owned.push_back(std::move(completer));
    return backends.owned.back().get();
  };

  if (config.backend_mode == BackendMode::Replay) {
    if (!std::filesystem::exists(config.replay_file)) {
      throw ConfigError("replay_file does not exist: " +
                        config.replay_file.string());
    }
    backends.store = std::make_unique<provider::ReplayStore>(
        provider::ReplayStore::load(config.replay_file));
    backends.generator = attach(std::make_unique<provider::ReplayCompleter>(
        config.generator(), *backends.store));
    backends.judge = attach(std::make_unique<provider::ReplayCompleter>(
        config.judge(), *backends.store));
    backends.summarizer = attach(std::make_unique<provider::ReplayCompleter>(
        config.summarizer(), *backends.store));
    return backends;
  }

  const auto cache_dir =
      config.cache_dir.empty() ? config.output_dir / "cache" : config.cache_dir;
  backends.cache = std::make_unique<provider::ResponseCache>(cache_dir);
  auto live = [&](const provider::ProviderProfile& profile) {
    return attach(std::make_unique<provider::LiveCompleter>(profile,
                                                            *backends.cache));
  };
  provider::Completer* generator = live(config.generator());
  provider::Completer* judge = live(config.judge());
  provider::Completer* summarizer = live(config.summarizer());

  if (config.backend_mode == BackendMode::Record) {
    const auto replay_path = config.replay_file.empty()
                                 ? config.output_dir / "replay.jsonl"
                                 : config.replay_file;
    backends.writer = std::make_unique<provider::ReplayWriter>(replay_path);
    generator = attach(std::make_unique<provider::RecordingCompleter>(
        *generator, *backends.writer));
    judge = attach(std::make_unique<provider::RecordingCompleter>(
        *judge, *backends.writer));
    summarizer = attach(std::make_unique<provider::RecordingCompleter>(
        *summarizer, *backends.writer));
  }
  backends.generator = generator;
  backends.judge = judge;
  backends.summarizer = summarizer;
  return backends;
}

struct PipelineState {
  std::vector<generation::CandidateAnnotation> candidates;
  std::vector<judging::RatingReport> reports;
  selection::SelectionResult top_temperature;
  selection::SelectionResult top_m;
  std::string refined_top_temperature_text;
  std::string refined_top_m_text;
  std::optional<metrics::ComparisonTable> table;
};

class Runner {
 public:
  Runner(RunConfig config, std::filesystem::path dir, RunManifest manifest)
      : config_(std::move(config)),
        dir_(std::move(dir)),
        manifest_(std::move(manifest)) {}

  RunManifest run_from(std::size_t first_stage) {
    const auto& stages = stage_names();
    for (std::size_t i = first_stage; i < stages.size(); ++i) {
      const std::string& stage = stages[i];
      try {
        run_stage(stage);
      } catch (const std::exception& e) {
        manifest_.stage_status[stage] = "failed";
        save_manifest();
        throw StageError(stage, e.what());
      }
      manifest_.stage_status[stage] = "done";
      save_manifest();
    }
    return manifest_;
  }

  /// Loads the artifacts of already-done stages so a resumed run can pick
  /// up where the failed one stopped.
  void load_done_stages(std::size_t first_stage) {
    const auto& stages = stage_names();
    for (std::size_t i = 0; i < first_stage && i < stages.size(); ++i) {
      const std::string& stage = stages[i];
      if (stage == "generate") {
        state_.candidates = artifacts::candidates_from_jsonl(
            artifacts::read_text_file(dir_ / artifacts::kCandidatesFile));
      } else if (stage == "judge") {
        state_.reports = artifacts::ratings_from_jsonl(
            artifacts::read_text_file(dir_ / artifacts::kRatingsFile));
      } else if (stage == "select") {
        auto loaded = artifacts::selection_from_json(
            artifacts::read_text_file(dir_ / artifacts::kSelectionFile));
        state_.top_temperature = std::move(loaded.top_temperature);
        state_.top_m = std::move(loaded.top_m);
      } else if (stage == "refine") {
        state_.refined_top_m_text =
            artifacts::read_text_file(dir_ / artifacts::kRefinedTopMFile);
        state_.refined_top_temperature_text = artifacts::read_text_file(
            dir_ / artifacts::kRefinedTopTemperatureFile);
      } else if (stage == "metrics") {
        state_.table = artifacts::metrics_from_json(
            artifacts::read_text_file(dir_ / artifacts::kMetricsFile));
      }
    }
  }

 private:
  // Backends are built on first use so stages that never call a model
  // (metrics, report) can run even when the replay file is gone.
  Backends& backends() {
    if (!backends_.has_value()) {
      backends_.emplace(make_backends(config_));
      if (backends_->writer != nullptr) {
        manifest_.artifact_paths["replay"] =
            backends_->writer->file().generic_string();
      }
    }
    return *backends_;
  }

  void run_stage(const std::string& stage) {
    if (stage == "generate") {
      state_.candidates = generation::generate_candidates(
          config_.task, config_.grid, *backends().generator,
          generation::GenerationOptions{config_.max_tokens.generation,
                                        config_.parallelism});
      write_artifact(artifacts::kCandidatesFile, "candidates",
                     artifacts::candidates_to_jsonl(state_.candidates));
    } else if (stage == "judge") {
      auto outcome = judging::judge_candidates(
          config_.task, state_.candidates, config_.rubric, *backends().judge,
          judging::JudgingOptions{config_.max_tokens.judging,
                                  config_.parallelism});
      for (const auto& failure : outcome.failures) {
        std::cerr << "warning: judging failed for " << failure.candidate_id
                  << ": " << failure.cause << "\n";
      }
      state_.reports = std::move(outcome.reports);
      write_artifact(artifacts::kRatingsFile, "ratings",
                     artifacts::ratings_to_jsonl(state_.reports));
    } else if (stage == "select") {
      auto stats = selection::aggregate(state_.reports, state_.candidates);
      state_.top_temperature = selection::select_top_temperature(
          state_.candidates, state_.reports, stats);
      state_.top_m =
          selection::select_top_m(state_.candidates, state_.reports, config_.m);
      write_artifact(artifacts::kSelectionFile, "selection",
                     artifacts::selection_to_json(stats, state_.top_temperature,
                                                  state_.top_m));
    } else if (stage == "refine") {
      const refinement::RefineOptions options{config_.similarity_threshold,
                                              config_.summarizer_temperature,
                                              config_.max_tokens.summarization};
      auto refined_top_m =
          refinement::refine(config_.task, state_.top_m, state_.candidates,
                             *backends().summarizer, options);
      auto refined_top_temperature = refinement::refine(
          config_.task, state_.top_temperature, state_.candidates,
          *backends().summarizer, options);
      state_.refined_top_m_text = refined_top_m.final_text;
      state_.refined_top_temperature_text = refined_top_temperature.final_text;
      write_artifact(artifacts::kRefinedTopMFile, "refined_top_m",
                     refined_top_m.final_text);
      write_artifact(artifacts::kRefinedTopTemperatureFile,
                     "refined_top_temperature",
                     refined_top_temperature.final_text);
      write_artifact(artifacts::kDedupLogFile, "dedup_log",
                     artifacts::dedup_logs_to_json(
                         refined_top_m.dedup_log,
                         refined_top_temperature.dedup_log));
    } else if (stage == "metrics") {
      state_.table = compute_comparison();
      write_artifact(artifacts::kMetricsFile, "metrics",
                     artifacts::metrics_to_json(*state_.table));
    } else if (stage == "report") {
      write_artifact(artifacts::kReportFile, "report",
                     metrics::render_report(*state_.table));
    }
  }

  metrics::ComparisonTable compute_comparison() const {
    std::vector<metrics::MetricsReport> rows;
    rows.push_back(metrics::compute_metrics("Baseline (Individual)",
                                            state_.candidates.at(0).text));

    metrics::TextCounts pooled;
    for (const auto& candidate : state_.candidates) {
      const auto counts = metrics::count_text(candidate.text);
      pooled.sentences += counts.sentences;
      pooled.words += counts.words;
      pooled.syllables += counts.syllables;
    }
    if (pooled.sentences == 0 || pooled.words == 0) {
      throw metrics::EmptyTextError("candidate sentences");
    }
    metrics::MetricsReport mean_row;
    mean_row.label = "Mean Individual";
    mean_row.avg_sentence_length = static_cast<double>(pooled.words) /
                                   static_cast<double>(pooled.sentences);
    mean_row.readability = metrics::flesch_from_counts(
        pooled.words, pooled.sentences, pooled.syllables);
    mean_row.sentence_count = pooled.sentences;
    mean_row.word_count = pooled.words;
    mean_row.syllable_count = pooled.syllables;
    rows.push_back(std::move(mean_row));

    rows.push_back(
        metrics::compute_metrics("Top M Responses", state_.refined_top_m_text));
    rows.push_back(metrics::compute_metrics(
        "Top Temperature", state_.refined_top_temperature_text));
    return metrics::build_comparison(rows);
  }

  void write_artifact(const char* filename, const char* name,
                      const std::string& contents) {
    artifacts::write_text_file(dir_ / filename, contents);
    manifest_.artifact_paths[name] = filename;
  }

  void save_manifest() {
    artifacts::write_text_file(dir_ / artifacts::kManifestFile,
                               manifest_.to_json().dump(2) + "\n");
  }

  RunConfig config_;
  std::filesystem::path dir_;
  RunManifest manifest_;
  std::optional<Backends> backends_;
  PipelineState state_;
};

}  // namespace detail

/// Executes all stages in order, persisting each stage's artifact before
/// the next begins. On failure the manifest records the failed stage and
/// the prior artifacts stay usable for resume.
inline RunManifest run_pipeline(const RunConfig& config) {
  config.validate();
  const auto dir = config.output_dir;
  if (std::filesystem::exists(dir / artifacts::kManifestFile)) {
    throw ConfigError("output_dir already contains a run (" +
                      (dir / artifacts::kManifestFile).string() +
                      "); use resume or a fresh directory");
  }
  std::filesystem::create_directories(dir);

  const std::string config_bytes = config.to_json().dump(2) + "\n";
  artifacts::write_text_file(dir / artifacts::kConfigFile, config_bytes);

  RunManifest manifest;
  manifest.run_id = detail::make_run_id();
  manifest.config_digest = bibweave::detail::sha256_hex(config_bytes);
  for (const auto& stage : stage_names()) manifest.stage_status[stage] = "pending";
  manifest.artifact_paths["config"] = artifacts::kConfigFile;
  artifacts::write_text_file(dir / artifacts::kManifestFile,
                             manifest.to_json().dump(2) + "\n");

  detail::Runner runner(config, dir, manifest);
  return runner.run_from(0);
}

namespace detail {

struct LoadedRun {
  RunConfig config;
  RunManifest manifest;
  std::size_t first_pending = 0;
};

inline LoadedRun load_run(const std::filesystem::path& run_dir) {
  const auto manifest_path = run_dir / artifacts::kManifestFile;
  if (!std::filesystem::exists(manifest_path)) {
    throw CorruptManifestError("missing " + manifest_path.string());
  }
  nlohmann::json manifest_json;
  try {
    manifest_json =
        nlohmann::json::parse(artifacts::read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptManifestError(e.what());
  }
  auto manifest = RunManifest::from_json(manifest_json);

  const auto config_path = run_dir / artifacts::kConfigFile;
  if (!std::filesystem::exists(config_path)) {
    throw CorruptManifestError("missing " + config_path.string());
  }
  const std::string config_bytes = artifacts::read_text_file(config_path);
  if (bibweave::detail::sha256_hex(config_bytes) != manifest.config_digest) {
    throw CorruptManifestError("config digest mismatch; the config file was "
                               "modified after the run started");
  }

  LoadedRun loaded{RunConfig::load(config_path), std::move(manifest), 0};
  loaded.config.output_dir = std::filesystem::absolute(run_dir);

  const auto& stages = stage_names();
  while (loaded.first_pending < stages.size() &&
         loaded.manifest.stage_status[stages[loaded.first_pending]] == "done") {
    ++loaded.first_pending;
  }
  return loaded;
}

}  // namespace detail

/// Re-executes a run from its first non-done stage, reusing persisted
/// artifacts and the response cache. A fully done run is a no-op.
inline RunManifest resume(const std::filesystem::path& run_dir) {
  auto loaded = detail::load_run(run_dir);
  loaded.config.validate();
  if (loaded.first_pending >= stage_names().size()) {
    return loaded.manifest;
  }
  detail::Runner runner(loaded.config, loaded.config.output_dir,
                        loaded.manifest);
  runner.load_done_stages(loaded.first_pending);
  return runner.run_from(loaded.first_pending);
}

/// Recomputes the metrics and report stages from the persisted texts.
inline RunManifest recompute_metrics(const std::filesystem::path& run_dir) {
  auto loaded = detail::load_run(run_dir);
  const auto& stages = stage_names();
  const std::size_t metrics_index = 4;
  for (std::size_t i = 0; i < metrics_index; ++i) {
    if (loaded.manifest.stage_status[stages[i]] != "done") {
      throw StageError("metrics", "stage \"" + stages[i] +
                                      "\" has not completed; resume the run "
                                      "first");
    }
  }
  loaded.manifest.stage_status[stages[metrics_index]] = "pending";
  loaded.manifest.stage_status[stages[metrics_index + 1]] = "pending";
  detail::Runner runner(loaded.config, loaded.config.output_dir,
                        loaded.manifest);
  runner.load_done_stages(metrics_index);
  return runner.run_from(metrics_index);
}

/// Human-readable dump of a run directory's artifacts. `stages` filters to
/// a subset of {candidates, ratings, selection, metrics, report}.
inline std::string inspect(const std::filesystem::path& run_dir,
                           const std::set<std::string>& stages = {}) {
  auto wants = [&stages](const char* name) {
    return stages.empty() || stages.count(name) > 0;
  };
  auto loaded = detail::load_run(run_dir);
  std::ostringstream out;
  out << "run " << loaded.manifest.run_id << " (" << run_dir.string() << ")\n";
  for (const auto& stage : stage_names()) {
    out << "  " << stage << ": " << loaded.manifest.stage_status[stage] << "\n";
  }

  auto have = [&run_dir](const char* file) {
    return std::filesystem::exists(run_dir / file);
  };

  if (wants("candidates") && have(artifacts::kCandidatesFile)) {
    out << "\ncandidates\n";
    const auto candidates = artifacts::candidates_from_jsonl(
        artifacts::read_text_file(run_dir / artifacts::kCandidatesFile));
    for (const auto& candidate : candidates) {
      std::string preview = candidate.text.substr(0, 60);
      for (auto& c : preview) {
        if (c == '\n') c = ' ';
      }
      out << "  " << candidate.id << "  "
          << selection::ConfigKey::of(candidate.config).str()
          << ",repeat=" << candidate.config.repeat_index << "  \"" << preview
          << (candidate.text.size() > 60 ? "...\"" : "\"") << "\n";
    }
  }
  if (wants("ratings") && have(artifacts::kRatingsFile)) {
    out << "\nratings\n";
    const auto reports = artifacts::ratings_from_jsonl(
        artifacts::read_text_file(run_dir / artifacts::kRatingsFile));
    for (const auto& report : reports) {
      out << "  " << report.candidate_id << "  overall=" << report.overall;
      for (const auto& [name, value] : report.scores) {
        out << "  " << name << "=" << value;
      }
      out << "\n";
    }
  }
  if (wants("selection") && have(artifacts::kSelectionFile)) {
    out << "\nselection\n";
    const auto selection_json = nlohmann::json::parse(
        artifacts::read_text_file(run_dir / artifacts::kSelectionFile));
    for (const auto& entry : selection_json.at("selections")) {
      out << "  " << entry.at("strategy").get<std::string>() << " (parameter "
          << entry.at("parameter").dump() << "):";
      for (const auto& id : entry.at("chosen")) {
        out << " " << id.get<std::string>();
      }
      out << "\n";
    }
    out << "  per-temperature stats:\n";
    for (const auto& [temperature, stat] :
         selection_json.at("per_temperature_stats").items()) {
      out << "    " << temperature
          << ": mean=" << stat.at("mean_overall").dump()
          << " count=" << stat.at("count").dump() << "\n";
    }
  }
  if (wants("metrics") && have(artifacts::kReportFile)) {
    out << "\n" << artifacts::read_text_file(run_dir / artifacts::kReportFile);
  } else if (wants("report") && have(artifacts::kReportFile)) {
    out << "\n" << artifacts::read_text_file(run_dir / artifacts::kReportFile);
  }
  return out.str();
}

}  // namespace bibweave::pipeline

#endif  // BIBWEAVE_PIPELINE_HPP
