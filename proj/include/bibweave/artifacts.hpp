#ifndef BIBWEAVE_ARTIFACTS_HPP
#define BIBWEAVE_ARTIFACTS_HPP

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bibweave/errors.hpp"
#include "bibweave/generation.hpp"
#include "bibweave/judging.hpp"
#include "bibweave/metrics.hpp"
#include "bibweave/refinement.hpp"
#include "bibweave/selection.hpp"

// Run-directory file schemas. Every writer here is deterministic: field
// order is fixed, maps are emitted in sorted key order, and files are
// written atomically, so replaying one run twice yields identical bytes.

namespace bibweave::artifacts {

using nlohmann::json;
using nlohmann::ordered_json;

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kCandidatesFile = "candidates.jsonl";
inline constexpr const char* kRatingsFile = "ratings.jsonl";
inline constexpr const char* kSelectionFile = "selection.json";
inline constexpr const char* kRefinedTopMFile = "refined_top_m.txt";
inline constexpr const char* kRefinedTopTemperatureFile =
    "refined_top_temperature.txt";
inline constexpr const char* kDedupLogFile = "dedup_log.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kReportFile = "report.txt";
inline constexpr const char* kManifestFile = "manifest.json";

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& contents) {
  provider::detail::write_file_atomic(path, contents);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  return provider::detail::read_file(path);
}

// --- candidates.jsonl -------------------------------------------------

inline ordered_json candidate_to_json(const generation::CandidateAnnotation& c) {
  ordered_json line;
  line["id"] = c.id;
  line["temperature"] = c.config.temperature;
  if (c.config.top_k.has_value()) {
    line["top_k"] = *c.config.top_k;
  } else {
    line["top_k"] = nullptr;
  }
  line["top_p"] = c.config.top_p;
  line["repeat_index"] = c.config.repeat_index;
  line["fingerprint"] = c.fingerprint;
  line["text"] = c.text;
  return line;
}

inline std::string candidates_to_jsonl(
    const std::vector<generation::CandidateAnnotation>& candidates) {
  std::ostringstream out;
  for (const auto& candidate : candidates) {
    out << candidate_to_json(candidate).dump() << "\n";
  }
  return out.str();
}

inline std::vector<generation::CandidateAnnotation> candidates_from_jsonl(
    const std::string& contents) {
  std::vector<generation::CandidateAnnotation> candidates;
  std::istringstream lines(contents);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const json entry = json::parse(line);
    generation::CandidateAnnotation candidate;
    candidate.id = entry.at("id").get<std::string>();
    candidate.config.temperature = entry.at("temperature").get<double>();
    if (!entry.at("top_k").is_null()) {
      candidate.config.top_k = entry.at("top_k").get<int>();
    }
    candidate.config.top_p = entry.at("top_p").get<double>();
    candidate.config.repeat_index = entry.at("repeat_index").get<int>();
    candidate.fingerprint = entry.at("fingerprint").get<std::string>();
    candidate.text = entry.at("text").get<std::string>();
    candidates.push_back(std::move(candidate));
  }
  return candidates;
}

// --- ratings.jsonl ----------------------------------------------------

inline std::string ratings_to_jsonl(
    const std::vector<judging::RatingReport>& reports) {
  std::ostringstream out;
  for (const auto& report : reports) {
    ordered_json line;
    line["candidate_id"] = report.candidate_id;
    ordered_json scores;
    for (const auto& [name, value] : report.scores) scores[name] = value;
    line["scores"] = std::move(scores);
    line["overall"] = report.overall;
    line["raw_text"] = report.raw_text;
    out << line.dump() << "\n";
  }
  return out.str();
}

inline std::vector<judging::RatingReport> ratings_from_jsonl(
    const std::string& contents) {
  std::vector<judging::RatingReport> reports;
  std::istringstream lines(contents);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const json entry = json::parse(line);
    judging::RatingReport report;
    report.candidate_id = entry.at("candidate_id").get<std::string>();
    for (const auto& [name, value] : entry.at("scores").items()) {
      report.scores[name] = value.get<double>();
    }
    report.overall = entry.at("overall").get<double>();
    report.raw_text = entry.at("raw_text").get<std::string>();
    reports.push_back(std::move(report));
  }
  return reports;
}

// --- selection.json ---------------------------------------------------

inline ordered_json selection_result_to_json(
    const selection::SelectionResult& result) {
  ordered_json out;
  out["strategy"] = selection::strategy_name(result.strategy);
  if (result.strategy == selection::Strategy::TopTemperature) {
    out["parameter"] = result.temperature;
  } else {
    out["parameter"] = result.m;
  }
  out["chosen"] = result.chosen;
  return out;
}

inline selection::SelectionResult selection_result_from_json(const json& in) {
  selection::SelectionResult result;
  const std::string strategy = in.at("strategy").get<std::string>();
  if (strategy == "top_temperature") {
    result.strategy = selection::Strategy::TopTemperature;
    result.temperature = in.at("parameter").get<double>();
  } else if (strategy == "top_m") {
    result.strategy = selection::Strategy::TopM;
    result.m = in.at("parameter").get<int>();
  } else {
    throw Error("unknown selection strategy: " + strategy);
  }
  for (const auto& id : in.at("chosen")) {
    result.chosen.push_back(id.get<std::string>());
  }
  return result;
}

inline std::string selection_to_json(const selection::AggregateStats& stats,
                                     const selection::SelectionResult& top_temperature,
                                     const selection::SelectionResult& top_m) {
  ordered_json out;
  ordered_json per_config;
  for (const auto& [key, stat] : stats.per_config) {
    per_config[key.str()] = ordered_json{{"mean_overall", stat.mean_overall},
                                         {"majority_overall", stat.majority_overall},
                                         {"count", stat.count}};
  }
  out["per_config_stats"] = std::move(per_config);
  ordered_json per_temperature;
  for (const auto& [temperature, stat] : stats.per_temperature) {
    per_temperature[detail::format_real6(temperature)] =
        ordered_json{{"mean_overall", stat.mean_overall}, {"count", stat.count}};
  }
  out["per_temperature_stats"] = std::move(per_temperature);
  out["selections"] = ordered_json::array({selection_result_to_json(top_temperature),
                                           selection_result_to_json(top_m)});
  return out.dump(2) + "\n";
}

struct SelectionArtifacts {
  selection::SelectionResult top_temperature;
  selection::SelectionResult top_m;
};

inline SelectionArtifacts selection_from_json(const std::string& contents) {
  const json in = json::parse(contents);
  SelectionArtifacts out;
  bool saw_temperature = false;
  bool saw_m = false;
  for (const auto& entry : in.at("selections")) {
    auto result = selection_result_from_json(entry);
    if (result.strategy == selection::Strategy::TopTemperature) {
      out.top_temperature = std::move(result);
      saw_temperature = true;
    } else {
      out.top_m = std::move(result);
      saw_m = true;
    }
  }
  if (!saw_temperature || !saw_m) {
    throw Error("selection artifact is missing a strategy");
  }
  return out;
}

// --- dedup_log.json ---------------------------------------------------

inline ordered_json dedup_log_to_json(
    const std::vector<refinement::DedupEntry>& log) {
  ordered_json out = ordered_json::array();
  for (const auto& entry : log) {
    out.push_back(ordered_json{{"removed_sentence", entry.removed_sentence},
                               {"kept_sentence", entry.kept_sentence},
                               {"similarity", entry.similarity}});
  }
  return out;
}

inline std::string dedup_logs_to_json(
    const std::vector<refinement::DedupEntry>& top_m_log,
    const std::vector<refinement::DedupEntry>& top_temperature_log) {
  ordered_json out;
  out["top_m"] = dedup_log_to_json(top_m_log);
  out["top_temperature"] = dedup_log_to_json(top_temperature_log);
  return out.dump(2) + "\n";
}

// --- metrics.json -----------------------------------------------------

inline std::string metrics_to_json(const metrics::ComparisonTable& table) {
  ordered_json out;
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    rows.push_back(ordered_json{{"label", row.label},
                                {"avg_sentence_length", row.avg_sentence_length},
                                {"readability", row.readability},
                                {"sentence_count", row.sentence_count},
                                {"word_count", row.word_count},
                                {"syllable_count", row.syllable_count}});
  }
  out["rows"] = std::move(rows);
  ordered_json deltas = ordered_json::array();
  for (const auto& delta : table.deltas) {
    deltas.push_back(ordered_json{
        {"numerator", delta.numerator_label},
        {"denominator", delta.denominator_label},
        {"metric", metrics::metric_name(delta.metric)},
        {"percent", delta.percent},
        {"direction", metrics::direction_name(delta.direction)}});
  }
  out["deltas"] = std::move(deltas);
  out["discrepancies"] = table.discrepancies;
  return out.dump(2) + "\n";
}

inline metrics::ComparisonTable metrics_from_json(const std::string& contents) {
  const json in = json::parse(contents);
  metrics::ComparisonTable table;
  for (const auto& row : in.at("rows")) {
    metrics::MetricsReport report;
    report.label = row.at("label").get<std::string>();
    report.avg_sentence_length = row.at("avg_sentence_length").get<double>();
    report.readability = row.at("readability").get<double>();
    report.sentence_count = row.at("sentence_count").get<std::size_t>();
    report.word_count = row.at("word_count").get<std::size_t>();
    report.syllable_count = row.at("syllable_count").get<std::size_t>();
    table.rows.push_back(std::move(report));
  }
  for (const auto& entry : in.at("deltas")) {
    metrics::Delta delta;
    delta.numerator_label = entry.at("numerator").get<std::string>();
    delta.denominator_label = entry.at("denominator").get<std::string>();
    delta.metric = entry.at("metric").get<std::string>() == "readability"
                       ? metrics::Metric::Readability
                       : metrics::Metric::SentenceLength;
    delta.percent = entry.at("percent").get<double>();
    delta.direction = entry.at("direction").get<std::string>() == "improvement"
                          ? metrics::Direction::Improvement
                          : metrics::Direction::Reduction;
    table.deltas.push_back(std::move(delta));
  }
  for (const auto& note : in.at("discrepancies")) {
    table.discrepancies.push_back(note.get<std::string>());
  }
  return table;
}

}  // namespace bibweave::artifacts

#endif  // BIBWEAVE_ARTIFACTS_HPP
