#ifndef BIBWEAVE_GENERATION_HPP
#define BIBWEAVE_GENERATION_HPP

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bibweave/detail/parallel.hpp"
#include "bibweave/errors.hpp"
#include "bibweave/provider.hpp"
#include "bibweave/sampling.hpp"

// Tier 1: build the bibliography prompt, expand the hyperparameter grid and
// fan generation calls out across it to collect diverse candidate drafts.

namespace bibweave::generation {

class EmptyAxisError : public Error {
 public:
  explicit EmptyAxisError(const std::string& axis)
      : Error("sweep grid axis \"" + axis + "\" must be non-empty") {}
};

struct SourceEntry {
  std::vector<std::string> authors;
  std::string title;
  int year = 0;
  std::optional<std::string> venue;
  std::optional<std::string> identifier;

  void validate() const {
    if (title.empty()) throw ConfigError("source: title must be non-empty");
    if (year < 1500 || year > 2100) {
      throw ConfigError("source \"" + title + "\": year must be in [1500, 2100]");
    }
  }
};

/// Renders a source in author–year–title order, exactly as it is shown to
/// the generator. The refinement layer matches this shape to recognize
/// citation lines, so keep the two in sync.
inline std::string render_citation_line(const SourceEntry& source) {
  std::ostringstream out;
  for (std::size_t i = 0; i < source.authors.size(); ++i) {
    if (i > 0) out << "; ";
    out << source.authors[i];
  }
  if (!source.authors.empty()) out << " ";
  out << "(" << source.year << "). " << source.title << ".";
  if (source.venue.has_value() && !source.venue->empty()) {
    out << " " << *source.venue << ".";
  }
  if (source.identifier.has_value() && !source.identifier->empty()) {
    out << " " << *source.identifier;
  }
  return out.str();
}

struct BibliographyTask {
  std::string topic;
  std::vector<SourceEntry> sources;  // empty = model picks its own sources
  int entry_count = 1;
  std::string style_notes;
  int annotation_sentences = 3;

  void validate() const {
    if (topic.empty()) throw ConfigError("task: topic must be non-empty");
    if (entry_count < 1) throw ConfigError("task: entry_count must be >= 1");
    if (annotation_sentences < 1) {
      throw ConfigError("task: annotation_sentences must be >= 1");
    }
    if (!sources.empty() &&
        entry_count != static_cast<int>(sources.size())) {
      throw ConfigError("task: entry_count must equal the number of sources");
    }
    for (const auto& source : sources) source.validate();
  }
};

struct SweepGrid {
  std::vector<double> temperatures;
  std::vector<std::optional<int>> top_ks;
  std::vector<double> top_ps;
  int repeats = 1;

  void validate() const {
    if (temperatures.empty()) throw EmptyAxisError("temperatures");
    if (top_ps.empty()) throw EmptyAxisError("top_ps");
    if (repeats < 1) throw ConfigError("grid: repeats must be >= 1");
    auto check_dup = [](auto values, const char* axis) {
      std::sort(values.begin(), values.end());
      if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
        throw ConfigError(std::string("grid: duplicate value in axis \"") +
                          axis + "\"");
      }
    };
    check_dup(temperatures, "temperatures");
    check_dup(top_ps, "top_ps");
    check_dup(top_ks, "top_ks");
    for (double t : temperatures) {
      for (const auto& k : top_ks) {
        for (double p : top_ps) {
          GenerationConfig{t, k, p, 0}.validate();
        }
      }
    }
  }
};

/// Default sweep: spans low-to-high randomness at desk-scale cost.
inline SweepGrid default_grid() {
  return SweepGrid{{0.2, 0.5, 0.8, 1.1}, {40}, {0.8, 0.95}, 1};
}

/// Full Cartesian product of the grid axes in lexicographic order:
/// temperature ascending, top_k ascending with absent last, top_p
/// ascending, repeat_index ascending.
inline std::vector<GenerationConfig> expand_grid(const SweepGrid& grid) {
  grid.validate();

  auto temperatures = grid.temperatures;
  std::sort(temperatures.begin(), temperatures.end());
  auto top_ps = grid.top_ps;
  std::sort(top_ps.begin(), top_ps.end());
  auto top_ks = grid.top_ks.empty()
                    ? std::vector<std::optional<int>>{std::nullopt}
                    : grid.top_ks;
  std::sort(top_ks.begin(), top_ks.end(),
            [](const std::optional<int>& a, const std::optional<int>& b) {
              if (a.has_value() != b.has_value()) return a.has_value();
              return a < b;
            });

  std::vector<GenerationConfig> configs;
  configs.reserve(temperatures.size() * top_ks.size() * top_ps.size() *
                  static_cast<std::size_t>(grid.repeats));
  for (double t : temperatures) {
    for (const auto& k : top_ks) {
      for (double p : top_ps) {
        for (int r = 0; r < grid.repeats; ++r) {
          configs.push_back(GenerationConfig{t, k, p, r});
        }
      }
    }
  }
  return configs;
}

struct PromptPair {
  std::string system_prompt;
  std::string user_prompt;
};

/// Deterministic generation prompt. Sources are rendered verbatim, one per
/// line, to keep the model anchored to the exact citations.
inline PromptPair build_generation_prompt(const BibliographyTask& task) {
  task.validate();

  std::string system_prompt =
      "You are an expert research librarian who writes annotated "
      "bibliographies. For every source you produce a citation line followed "
      "by an annotation that combines a descriptive summary of the source's "
      "key findings with a critical evaluation of its relevance, accuracy, "
      "and quality.";

  std::ostringstream user;
  user << "Topic: " << task.topic << "\n\n";
  if (!task.sources.empty()) {
    user << "Produce an annotated bibliography with " << task.entry_count
         << " entries covering exactly the sources listed below, in the "
            "order given.\n\nSources:\n";
    for (const auto& source : task.sources) {
      user << render_citation_line(source) << "\n";
    }
  } else {
    user << "Produce an annotated bibliography with " << task.entry_count
         << " entries. Choose the " << task.entry_count
         << " most relevant sources for the topic yourself, and render each "
            "citation in author-year-title order.\n";
  }
  user << "\nFor each entry: put the citation on its own line, then write an "
          "annotation of about "
       << task.annotation_sentences
       << " sentences combining a descriptive summary with a critical "
          "evaluation.\n";
  if (!task.style_notes.empty()) {
    user << "Style notes: " << task.style_notes << "\n";
  }
  return PromptPair{std::move(system_prompt), user.str()};
}

/// One generated draft tied to the sampling configuration that produced it.
struct CandidateAnnotation {
  std::string id;
  GenerationConfig config;
  std::string text;
  std::string fingerprint;
};

inline std::string candidate_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cand-%04zu", index);
  return buf;
}

/// Raised when some grid configurations fail; carries every candidate that
/// did complete so a rerun can pick the rest up from the cache.
class PartialGenerationError : public Error {
 public:
  PartialGenerationError(std::vector<CandidateAnnotation> completed_in,
                         GenerationConfig failed_config_in, std::string cause_in)
      : Error("generation incomplete: " +
              std::to_string(completed_in.size()) +
              " candidates completed, first failure at temperature=" +
              detail::format_real6(failed_config_in.temperature) + ": " +
              cause_in),
        completed(std::move(completed_in)),
        failed_config(failed_config_in),
        cause(std::move(cause_in)) {}

  std::vector<CandidateAnnotation> completed;
  GenerationConfig failed_config;
  std::string cause;
};

struct GenerationOptions {
  int max_tokens = 1024;
  std::size_t parallelism = 1;
};

/// One complete() call per grid configuration, fanned out up to
/// options.parallelism at a time. Results are assembled in grid enumeration
/// order regardless of completion order and ids follow that order.
inline std::vector<CandidateAnnotation> generate_candidates(
    const BibliographyTask& task, const SweepGrid& grid,
    provider::Completer& completer, const GenerationOptions& options = {}) {
  const auto configs = expand_grid(grid);
  const auto prompts = build_generation_prompt(task);

  std::vector<std::optional<provider::CompletionResult>> results(configs.size());
  std::vector<std::optional<std::string>> failures(configs.size());
  bibweave::detail::parallel_for(
      configs.size(), options.parallelism, [&](std::size_t i) {
        provider::CompletionRequest request{prompts.system_prompt,
                                            prompts.user_prompt, configs[i],
                                            options.max_tokens};
        try {
          results[i] = completer.complete(request);
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      });

  std::vector<CandidateAnnotation> candidates;
  candidates.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (results[i].has_value()) {
      candidates.push_back(CandidateAnnotation{candidate_id(i), configs[i],
                                               results[i]->text,
                                               results[i]->fingerprint});
    }
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (failures[i].has_value()) {
      throw PartialGenerationError(std::move(candidates), configs[i],
                                   *failures[i]);
    }
  }
  return candidates;
}

}  // namespace bibweave::generation

#endif  // BIBWEAVE_GENERATION_HPP
