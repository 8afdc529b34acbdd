#ifndef BIBWEAVE_REFINEMENT_HPP
#define BIBWEAVE_REFINEMENT_HPP

#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "bibweave/errors.hpp"
#include "bibweave/generation.hpp"
#include "bibweave/provider.hpp"
#include "bibweave/selection.hpp"
#include "bibweave/textkit.hpp"

// Tier 3b: summarize the selected candidates with a third model, strip
// redundant sentences via token-set Jaccard similarity, and reassemble the
// result into the final bibliography.

namespace bibweave::refinement {

class EmptySummaryError : public Error {
 public:
  EmptySummaryError() : Error("summarizer returned no sentences") {}
};

struct DedupEntry {
  std::string removed_sentence;
  std::string kept_sentence;
  double similarity = 0.0;
};

struct DedupResult {
  std::vector<textkit::Sentence> kept;
  std::vector<DedupEntry> log;
};

/// Single forward pass in sentence order: a sentence is dropped iff its
/// Jaccard similarity with ANY earlier kept sentence reaches the threshold
/// (inclusive). The log pairs each removal with its closest kept sentence.
inline DedupResult remove_redundant_sentences(
    const std::vector<textkit::Sentence>& sentences, double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0) {
    throw ConfigError("similarity threshold must be in (0, 1]");
  }

  DedupResult result;
  std::vector<textkit::TokenSet> kept_tokens;
  for (const auto& sentence : sentences) {
    const auto tokens = textkit::tokenize(sentence.text);
    double best_similarity = -1.0;
    std::size_t best_index = 0;
    for (std::size_t j = 0; j < result.kept.size(); ++j) {
      const double similarity =
          textkit::jaccard_similarity(tokens, kept_tokens[j]);
      if (similarity > best_similarity) {
        best_similarity = similarity;
        best_index = j;
      }
    }
    if (best_similarity >= threshold) {
      result.log.push_back(DedupEntry{sentence.text,
                                      result.kept[best_index].text,
                                      best_similarity});
    } else {
      result.kept.push_back(sentence);
      kept_tokens.push_back(tokens);
    }
  }
  return result;
}

/// Citation lines are exempt from dedup: two entries may legitimately cite
/// near-identical titles. A line is a citation line iff it carries the
/// rendered "(year)." marker or starts with an enumeration marker.
inline bool is_citation_line(const std::string& line) {
  static const std::regex kEnumeration(R"(^\s*(\[\d+\]|\d+[.)]|[-*])\s+)");
  static const std::regex kRenderedSource(R"(\(\d{4}\)\.)");
  return std::regex_search(line, kEnumeration) ||
         std::regex_search(line, kRenderedSource);
}

/// Each selected candidate goes in verbatim, delimited and numbered; the
/// summarizer is asked for one consolidated bibliography that keeps every
/// distinct citation once.
inline generation::PromptPair build_summarize_prompt(
    const generation::BibliographyTask& task,
    const std::vector<generation::CandidateAnnotation>& selected) {
  if (selected.empty()) throw ConfigError("summarize: no selected candidates");

  std::string system_prompt =
      "You are an editor who merges multiple annotated bibliography drafts "
      "into one consolidated annotated bibliography with no redundant "
      "content.";

  std::ostringstream user;
  user << "Topic: " << task.topic << "\n\n"
       << "Below are " << selected.size()
       << " candidate annotated bibliographies for the same request, each "
          "delimited and numbered. Merge them into one consolidated "
          "annotated bibliography: keep every distinct citation exactly "
          "once, give each citation a single annotation of about "
       << task.annotation_sentences
       << " sentences, keep each citation on its own line, and do not "
          "invent new sources.\n";
  for (std::size_t i = 0; i < selected.size(); ++i) {
    user << "\n--- Candidate " << (i + 1) << " ---\n"
         << selected[i].text << "\n--- End candidate " << (i + 1) << " ---\n";
  }
  return generation::PromptPair{std::move(system_prompt), user.str()};
}

struct BibliographyEntry {
  std::string citation_line;  // empty for preamble text without a citation
  std::string annotation;
};

struct RefinedBibliography {
  selection::Strategy strategy = selection::Strategy::TopTemperature;
  std::string final_text;
  std::vector<BibliographyEntry> entries;
  std::vector<DedupEntry> dedup_log;
};

struct RefineOptions {
  double similarity_threshold = 0.8;
  double summarizer_temperature = 0.3;
  int max_tokens = 1024;
};

namespace detail {

struct RawEntry {
  std::string citation_line;
  std::string body;
};

inline std::vector<RawEntry> split_entries(const std::string& summary) {
  std::vector<RawEntry> entries;
  std::istringstream lines(summary);
  std::string line;
  auto append_body = [](std::string& body, const std::string& text) {
    if (!body.empty()) body += " ";
    body += text;
  };
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = textkit::detail::trim(line);
    if (trimmed.empty()) continue;
    if (is_citation_line(trimmed)) {
      entries.push_back(RawEntry{trimmed, ""});
    } else {
      if (entries.empty()) entries.push_back(RawEntry{"", ""});  // preamble
      append_body(entries.back().body, trimmed);
    }
  }
  return entries;
}

}  // namespace detail

/// Summarizes the selection, splits the summary into sentences, removes
/// redundant ones (citation lines exempt) and reassembles entries as
/// citation-then-annotation blocks separated by blank lines.
inline RefinedBibliography refine(
    const generation::BibliographyTask& task,
    const selection::SelectionResult& selection_result,
    const std::vector<generation::CandidateAnnotation>& candidates,
    provider::Completer& summarizer, const RefineOptions& options = {}) {
  if (selection_result.chosen.empty()) {
    throw ConfigError("refine: selection is empty");
  }

  std::vector<generation::CandidateAnnotation> selected;
  for (const auto& id : selection_result.chosen) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const auto& c) { return c.id == id; });
    if (it == candidates.end()) {
      throw selection::UnknownCandidateError(id);
    }
    selected.push_back(*it);
  }

  const auto prompts = build_summarize_prompt(task, selected);
  provider::CompletionRequest request{
      prompts.system_prompt, prompts.user_prompt,
      GenerationConfig{options.summarizer_temperature, std::nullopt, 1.0, 0},
      options.max_tokens};
  const auto completion = summarizer.complete(request);

  if (textkit::detail::trim(completion.text).empty()) {
    throw EmptySummaryError();
  }

  const auto raw_entries = detail::split_entries(completion.text);

  // Flatten annotation sentences across entries so dedup sees the whole
  // document in order, then map the kept ones back to their entries.
  std::vector<textkit::Sentence> all_sentences;
  std::vector<std::size_t> entry_of_sentence;
  for (std::size_t e = 0; e < raw_entries.size(); ++e) {
    for (auto& sentence : textkit::split_sentences(raw_entries[e].body)) {
      sentence.index = all_sentences.size();
      all_sentences.push_back(std::move(sentence));
      entry_of_sentence.push_back(e);
    }
  }

  auto dedup = remove_redundant_sentences(all_sentences,
                                          options.similarity_threshold);

  RefinedBibliography refined;
  refined.strategy = selection_result.strategy;
  refined.dedup_log = std::move(dedup.log);
  refined.entries.resize(raw_entries.size());
  for (std::size_t e = 0; e < raw_entries.size(); ++e) {
    refined.entries[e].citation_line = raw_entries[e].citation_line;
  }
  for (const auto& sentence : dedup.kept) {
    auto& annotation = refined.entries[entry_of_sentence[sentence.index]].annotation;
    if (!annotation.empty()) annotation += " ";
    annotation += sentence.text;
  }

  std::ostringstream out;
  bool first_block = true;
  for (const auto& entry : refined.entries) {
    if (entry.citation_line.empty() && entry.annotation.empty()) continue;
    if (!first_block) out << "\n";
    first_block = false;
    if (!entry.citation_line.empty()) out << entry.citation_line << "\n";
    if (!entry.annotation.empty()) out << entry.annotation << "\n";
  }
  refined.final_text = out.str();
  if (refined.final_text.empty()) throw EmptySummaryError();
  return refined;
}

}  // namespace bibweave::refinement

#endif  // BIBWEAVE_REFINEMENT_HPP
