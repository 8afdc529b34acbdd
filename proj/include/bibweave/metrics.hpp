#ifndef BIBWEAVE_METRICS_HPP
#define BIBWEAVE_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bibweave/errors.hpp"
#include "bibweave/textkit.hpp"

// Evaluation arithmetic: average sentence length, Flesch Reading Ease over
// the textkit counts, percent improvement/reduction deltas, and the
// comparison table with discrepancy flags for externally claimed
// percentages. Absolute readability values depend on the syllable
// heuristic; the percent arithmetic over given raw values does not.

namespace bibweave::metrics {

class EmptyTextError : public Error {
 public:
  explicit EmptyTextError(const std::string& what_missing)
      : Error("text has no " + what_missing) {}
};

class ZeroBaseError : public Error {
 public:
  ZeroBaseError() : Error("percent change against a zero base") {}
};

class MissingBaselineError : public Error {
 public:
  MissingBaselineError()
      : Error("comparison needs at least two rows, one labeled baseline") {}
};

struct TextCounts {
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::size_t syllables = 0;
};

/// Sentence / word / syllable counts for a text. Words are tokenizer output
/// counted with multiplicity; tokens without letters (years, page numbers)
/// count one syllable each.
inline TextCounts count_text(const std::string& text) {
  TextCounts counts;
  counts.sentences = textkit::split_sentences(text).size();
  for (const auto& word : textkit::tokenize_words(text)) {
    ++counts.words;
    bool has_letter = false;
    for (char c : word) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        has_letter = true;
        break;
      }
    }
    counts.syllables += has_letter
                            ? static_cast<std::size_t>(
                                  textkit::count_syllables(word))
                            : 1;
  }
  return counts;
}

/// Words per sentence, words counted with multiplicity.
inline double avg_sentence_length(const std::string& text) {
  const auto counts = count_text(text);
  if (counts.sentences == 0) throw EmptyTextError("sentences");
  return static_cast<double>(counts.words) /
         static_cast<double>(counts.sentences);
}

/// 206.835 - 1.015 * (words/sentences) - 84.6 * (syllables/words).
/// Not clamped: clamping would corrupt deltas on short texts.
inline double flesch_from_counts(std::size_t words, std::size_t sentences,
                                 std::size_t syllables) {
  if (sentences == 0) throw EmptyTextError("sentences");
  if (words == 0) throw EmptyTextError("words");
  const double wps = static_cast<double>(words) / static_cast<double>(sentences);
  const double spw = static_cast<double>(syllables) / static_cast<double>(words);
  return 206.835 - 1.015 * wps - 84.6 * spw;
}

inline double flesch_reading_ease(const std::string& text) {
  const auto counts = count_text(text);
  return flesch_from_counts(counts.words, counts.sentences, counts.syllables);
}

/// Metric values for one labeled text (or row of externally supplied raw
/// values, in which case the counts are zero).
struct MetricsReport {
  std::string label;
  double avg_sentence_length = 0.0;
  double readability = 0.0;
  std::size_t sentence_count = 0;
  std::size_t word_count = 0;
  std::size_t syllable_count = 0;
};

inline MetricsReport compute_metrics(std::string label,
                                     const std::string& text) {
  const auto counts = count_text(text);
  if (counts.sentences == 0) throw EmptyTextError("sentences");
  if (counts.words == 0) throw EmptyTextError("words");
  MetricsReport report;
  report.label = std::move(label);
  report.avg_sentence_length = static_cast<double>(counts.words) /
                               static_cast<double>(counts.sentences);
  report.readability =
      flesch_from_counts(counts.words, counts.sentences, counts.syllables);
  report.sentence_count = counts.sentences;
  report.word_count = counts.words;
  report.syllable_count = counts.syllables;
  return report;
}

inline MetricsReport report_from_values(std::string label,
                                        double avg_sentence_length,
                                        double readability) {
  MetricsReport report;
  report.label = std::move(label);
  report.avg_sentence_length = avg_sentence_length;
  report.readability = readability;
  return report;
}

enum class Direction { Improvement, Reduction };

inline const char* direction_name(Direction d) {
  return d == Direction::Improvement ? "improvement" : "reduction";
}

inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

/// improvement = 100*(value-base)/base, reduction = 100*(base-value)/base,
/// reported to 1 decimal place. reduction(v,b) == -improvement(v,b) exactly.
inline double percent_change(double value, double base, Direction direction) {
  if (base == 0.0) throw ZeroBaseError();
  const double raw = direction == Direction::Improvement
                         ? 100.0 * (value - base) / base
                         : 100.0 * (base - value) / base;
  return round1(raw);
}

enum class Metric { SentenceLength, Readability };

inline const char* metric_name(Metric m) {
  return m == Metric::SentenceLength ? "avg_sentence_length" : "readability";
}

struct Delta {
  std::string numerator_label;
  std::string denominator_label;
  Metric metric = Metric::SentenceLength;
  double percent = 0.0;
  Direction direction = Direction::Reduction;
};

/// An externally claimed percentage to check the computed deltas against.
struct ClaimedDelta {
  std::string numerator_label;
  std::string denominator_label;
  Metric metric = Metric::SentenceLength;
  double claimed_percent = 0.0;
  Direction direction = Direction::Reduction;
};

struct ComparisonTable {
  std::vector<MetricsReport> rows;
  std::vector<Delta> deltas;
  std::vector<std::string> discrepancies;
};

namespace detail {

inline std::string fold_label(const std::string& label) {
  std::string out;
  for (char c : label) out.push_back(textkit::detail::ascii_lower(c));
  return out;
}

inline double metric_value(const MetricsReport& row, Metric metric) {
  return metric == Metric::SentenceLength ? row.avg_sentence_length
                                          : row.readability;
}

}  // namespace detail

/// Emits both metrics' deltas for every row against the baseline row and,
/// when present, against the mean-individual row. Sentence length is
/// reported as a reduction, readability as an improvement. Each supplied
/// claim is checked against the matching computed delta and flagged as a
/// discrepancy when they differ by more than 1.0 percentage point.
inline ComparisonTable build_comparison(
    const std::vector<MetricsReport>& rows,
    const std::vector<ClaimedDelta>& claims = {}) {
  const MetricsReport* baseline = nullptr;
  const MetricsReport* mean_individual = nullptr;
  for (const auto& row : rows) {
    const std::string folded = detail::fold_label(row.label);
    if (baseline == nullptr && folded.rfind("baseline", 0) == 0) {
      baseline = &row;
    }
    if (mean_individual == nullptr &&
        folded.find("mean individual") != std::string::npos) {
      mean_individual = &row;
    }
  }
  if (rows.size() < 2 || baseline == nullptr) throw MissingBaselineError();

  ComparisonTable table;
  table.rows = rows;

  auto emit = [&table](const MetricsReport& row, const MetricsReport& reference) {
    table.deltas.push_back(
        Delta{row.label, reference.label, Metric::SentenceLength,
              percent_change(row.avg_sentence_length,
                             reference.avg_sentence_length,
                             Direction::Reduction),
              Direction::Reduction});
    table.deltas.push_back(Delta{
        row.label, reference.label, Metric::Readability,
        percent_change(row.readability, reference.readability,
                       Direction::Improvement),
        Direction::Improvement});
  };
  for (const auto& row : rows) {
    if (&row == baseline) continue;
    emit(row, *baseline);
  }
  if (mean_individual != nullptr) {
    for (const auto& row : rows) {
      if (&row == baseline || &row == mean_individual) continue;
      emit(row, *mean_individual);
    }
  }

  char buf[256];
  for (const auto& claim : claims) {
    const Delta* found = nullptr;
    for (const auto& delta : table.deltas) {
      if (delta.numerator_label == claim.numerator_label &&
          delta.denominator_label == claim.denominator_label &&
          delta.metric == claim.metric && delta.direction == claim.direction) {
        found = &delta;
        break;
      }
    }
    if (found == nullptr) {
      std::snprintf(buf, sizeof(buf),
                    "claim references a comparison that was not computed: "
                    "%s vs %s (%s)",
                    claim.numerator_label.c_str(),
                    claim.denominator_label.c_str(),
                    metric_name(claim.metric));
      table.discrepancies.emplace_back(buf);
      continue;
    }
    if (std::abs(found->percent - claim.claimed_percent) > 1.0) {
      std::snprintf(buf, sizeof(buf),
                    "%s vs %s %s: claimed %.0f%% but computed %.1f%%",
                    claim.numerator_label.c_str(),
                    claim.denominator_label.c_str(), metric_name(claim.metric),
                    claim.claimed_percent, found->percent);
      table.discrepancies.emplace_back(buf);
    }
  }
  return table;
}

/// Aligned plain-text rendering: the metric table, a delta section per
/// reference row, and a discrepancies footnote.
inline std::string render_report(const ComparisonTable& table) {
  std::size_t label_width = std::string("Output").size();
  for (const auto& row : table.rows) {
    label_width = std::max(label_width, row.label.size());
  }

  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %20s  %18s\n",
                static_cast<int>(label_width), "Output", "Avg. Sentence Length",
                "Readability Score");
  out << buf;
  for (const auto& row : table.rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %20.2f  %18.2f\n",
                  static_cast<int>(label_width), row.label.c_str(),
                  row.avg_sentence_length, row.readability);
    out << buf;
  }

  std::string current_reference;
  for (const auto& delta : table.deltas) {
    if (delta.denominator_label != current_reference) {
      current_reference = delta.denominator_label;
      out << "\nDelta vs " << current_reference << "\n";
    }
    std::snprintf(buf, sizeof(buf), "  %-*s  %s %s %.1f%%\n",
                  static_cast<int>(label_width),
                  delta.numerator_label.c_str(),
                  delta.metric == Metric::SentenceLength ? "sentence length"
                                                         : "readability",
                  direction_name(delta.direction), delta.percent);
    out << buf;
  }

  out << "\nDiscrepancies\n";
  if (table.discrepancies.empty()) {
    out << "  (none)\n";
  } else {
    for (const auto& note : table.discrepancies) {
      out << "  - " << note << "\n";
    }
  }
  return out.str();
}

}  // namespace bibweave::metrics

#endif  // BIBWEAVE_METRICS_HPP
