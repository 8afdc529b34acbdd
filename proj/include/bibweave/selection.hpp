#ifndef BIBWEAVE_SELECTION_HPP
#define BIBWEAVE_SELECTION_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "bibweave/errors.hpp"
#include "bibweave/generation.hpp"
#include "bibweave/judging.hpp"

// Tier 3a: aggregate judge ratings per configuration and per temperature,
// then pick candidates via the Top-Temperature and Top-M strategies. Pure
// functions; both selectors are permutation-invariant over their inputs.

namespace bibweave::selection {

class UnknownCandidateError : public Error {
 public:
  explicit UnknownCandidateError(const std::string& candidate_id)
      : Error("rating references unknown candidate \"" + candidate_id + "\"") {}
};

/// Sampling parameters without the repeat index: the bucket repeats of one
/// configuration share.
struct ConfigKey {
  double temperature = 0.0;
  std::optional<int> top_k;
  double top_p = 1.0;

  static ConfigKey of(const GenerationConfig& config) {
    return ConfigKey{config.temperature, config.top_k, config.top_p};
  }

  bool operator<(const ConfigKey& other) const {
    return std::tie(temperature, top_k, top_p) <
           std::tie(other.temperature, other.top_k, other.top_p);
  }

  bool operator==(const ConfigKey& other) const = default;

  std::string str() const {
    std::string k = top_k.has_value() ? std::to_string(*top_k) : "none";
    return "temp=" + bibweave::detail::format_real6(temperature) +
           ",top_k=" + k + ",top_p=" + bibweave::detail::format_real6(top_p);
  }
};

struct ConfigStats {
  double mean_overall = 0.0;
  int majority_overall = 0;
  std::size_t count = 0;

  bool operator==(const ConfigStats& other) const = default;
};

struct TemperatureStats {
  double mean_overall = 0.0;
  std::size_t count = 0;

  bool operator==(const TemperatureStats& other) const = default;
};

struct AggregateStats {
  std::map<ConfigKey, ConfigStats> per_config;
  std::map<double, TemperatureStats> per_temperature;

  bool operator==(const AggregateStats& other) const = default;
};

namespace detail {

// Mode of the overall scores rounded to nearest integer, ties broken toward
// the higher value.
inline int majority_vote(const std::vector<double>& overalls) {
  std::map<int, std::size_t> counts;
  for (double v : overalls) counts[static_cast<int>(std::lround(v))]++;
  int best = 0;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {  // ascending keys
    if (count >= best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

inline double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return judging::round2(sum / static_cast<double>(values.size()));
}

}  // namespace detail

/// Buckets overall scores per configuration (repeat_index excluded) and per
/// temperature. Means are reported to 2 decimals.
inline AggregateStats aggregate(
    const std::vector<judging::RatingReport>& reports,
    const std::vector<generation::CandidateAnnotation>& candidates) {
  if (reports.empty()) throw ConfigError("aggregate: no rating reports");
  std::unordered_map<std::string, const generation::CandidateAnnotation*> by_id;
  for (const auto& candidate : candidates) by_id[candidate.id] = &candidate;

  std::map<ConfigKey, std::vector<double>> config_scores;
  std::map<double, std::vector<double>> temperature_scores;
  for (const auto& report : reports) {
    auto it = by_id.find(report.candidate_id);
    if (it == by_id.end()) throw UnknownCandidateError(report.candidate_id);
    const auto& config = it->second->config;
    config_scores[ConfigKey::of(config)].push_back(report.overall);
    temperature_scores[config.temperature].push_back(report.overall);
  }

  AggregateStats stats;
  for (const auto& [key, scores] : config_scores) {
    stats.per_config[key] = ConfigStats{detail::mean(scores),
                                        detail::majority_vote(scores),
                                        scores.size()};
  }
  for (const auto& [temperature, scores] : temperature_scores) {
    stats.per_temperature[temperature] =
        TemperatureStats{detail::mean(scores), scores.size()};
  }
  return stats;
}

enum class Strategy { TopTemperature, TopM };

inline const char* strategy_name(Strategy s) {
  return s == Strategy::TopTemperature ? "top_temperature" : "top_m";
}

/// Candidates chosen by one strategy. `temperature` is the winning
/// temperature for TopTemperature; `m` is the requested count for TopM.
struct SelectionResult {
  Strategy strategy = Strategy::TopTemperature;
  std::vector<std::string> chosen;
  double temperature = 0.0;
  int m = 0;
};

/// Every rated candidate generated at the temperature with the highest mean
/// overall score (ties toward the lower temperature), in candidate order.
inline SelectionResult select_top_temperature(
    const std::vector<generation::CandidateAnnotation>& candidates,
    const std::vector<judging::RatingReport>& reports,
    const AggregateStats& stats) {
  if (stats.per_temperature.empty()) {
    throw ConfigError("select_top_temperature: no per-temperature stats");
  }
  double winner = 0.0;
  double best_mean = 0.0;
  bool first = true;
  for (const auto& [temperature, stat] : stats.per_temperature) {  // ascending
    if (first || stat.mean_overall > best_mean) {
      winner = temperature;
      best_mean = stat.mean_overall;
      first = false;
    }
  }

  std::set<std::string> rated;
  for (const auto& report : reports) rated.insert(report.candidate_id);

  SelectionResult result;
  result.strategy = Strategy::TopTemperature;
  result.temperature = winner;
  for (const auto& candidate : candidates) {
    if (candidate.config.temperature == winner && rated.count(candidate.id)) {
      result.chosen.push_back(candidate.id);
    }
  }
  return result;
}

/// The min(m, rated) highest-rated candidates, sorted by overall descending
/// with ties broken by lower temperature, then lower candidate index.
inline SelectionResult select_top_m(
    const std::vector<generation::CandidateAnnotation>& candidates,
    const std::vector<judging::RatingReport>& reports, int m) {
  if (m < 1) throw ConfigError("select_top_m: m must be >= 1");
  if (reports.empty()) throw ConfigError("select_top_m: no rating reports");

  std::unordered_map<std::string, std::size_t> index_by_id;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    index_by_id[candidates[i].id] = i;
  }

  struct Row {
    double overall;
    double temperature;
    std::size_t index;
    const std::string* id;
  };
  std::vector<Row> rows;
  rows.reserve(reports.size());
  for (const auto& report : reports) {
    auto it = index_by_id.find(report.candidate_id);
    if (it == index_by_id.end()) {
      throw UnknownCandidateError(report.candidate_id);
    }
    rows.push_back(Row{report.overall,
                       candidates[it->second].config.temperature, it->second,
                       &report.candidate_id});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.overall != b.overall) return a.overall > b.overall;
    if (a.temperature != b.temperature) return a.temperature < b.temperature;
    return a.index < b.index;
  });

  SelectionResult result;
  result.strategy = Strategy::TopM;
  result.m = m;
  const std::size_t take = std::min<std::size_t>(rows.size(), static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < take; ++i) result.chosen.push_back(*rows[i].id);
  return result;
}

}  // namespace bibweave::selection

#endif  // BIBWEAVE_SELECTION_HPP
