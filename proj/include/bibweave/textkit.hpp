#ifndef BIBWEAVE_TEXTKIT_HPP
#define BIBWEAVE_TEXTKIT_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bibweave/errors.hpp"

// Deterministic text primitives shared by the refinement and metrics layers.
// Everything here is a pure function over immutable inputs; no locale state
// is consulted (ASCII rules only, bytes >= 0x80 are treated as separators).

namespace bibweave::textkit {

class EmptyWordError : public Error {
 public:
  explicit EmptyWordError(const std::string& word)
      : Error("no letters remain in word: \"" + word + "\"") {}
};

/// One sentence of a source text. `index` is the 0-based position in the
/// sentence list the text was split into.
struct Sentence {
  std::string text;
  std::size_t index = 0;

  bool operator==(const Sentence& other) const = default;
};

using TokenSet = std::set<std::string>;

namespace detail {

inline bool is_ascii_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline bool is_ascii_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

inline std::string trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_ascii_space(s[begin])) ++begin;
  while (end > begin && is_ascii_space(s[end - 1])) --end;
  return std::string(s.substr(begin, end - begin));
}

}  // namespace detail

/// Dot-terminated tokens that never end a sentence. Fixed and versioned:
/// changing this list changes sentence counts and therefore readability
/// numbers, so treat edits as breaking.
inline const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> kAbbreviations = {
      "Dr.", "Mr.",  "Mrs.", "Ms.", "Prof.", "vs.", "et al.",
      "e.g.", "i.e.", "Fig.", "Eq.", "pp.",  "Vol.", "No."};
  return kAbbreviations;
}

namespace detail {

// True when the '.' at `dot_index` closes one of the fixed abbreviations,
// i.e. the text ending at the dot matches an entry and the entry starts at
// a word boundary.
inline bool ends_abbreviation(std::string_view text, std::size_t dot_index) {
  for (const std::string& abbr : abbreviations()) {
    const std::size_t n = abbr.size();
    if (dot_index + 1 < n) continue;
    const std::size_t start = dot_index + 1 - n;
    if (text.compare(start, n, abbr) != 0) continue;
    if (start == 0 || !is_ascii_alnum(text[start - 1])) return true;
  }
  return false;
}

}  // namespace detail

/// Splits `text` into sentences at '.', '!' or '?' followed by whitespace or
/// end-of-text, except when a '.' closes a fixed abbreviation. Sentences keep
/// their terminator and carry no surrounding whitespace; trailing text with
/// no terminator forms the final sentence. Empty input yields an empty list.
inline std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> sentences;
  auto emit = [&sentences](std::string_view piece) {
    std::string trimmed = detail::trim(piece);
    if (!trimmed.empty()) {
      sentences.push_back(Sentence{std::move(trimmed), sentences.size()});
    }
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_end = (i + 1 == text.size());
    if (!at_end && !detail::is_ascii_space(text[i + 1])) continue;
    if (c == '.' && detail::ends_abbreviation(text, i)) continue;
    emit(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  if (start < text.size()) emit(text.substr(start));
  return sentences;
}

/// Lowercased word tokens in document order, duplicates preserved. Tokens
/// are maximal runs of ASCII letters/digits; everything else separates.
inline std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (detail::is_ascii_alnum(c)) {
      current.push_back(detail::ascii_lower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

/// Token set of `text`: lowercase, punctuation stripped, duplicates folded.
inline TokenSet tokenize(std::string_view text) {
  auto words = tokenize_words(text);
  return TokenSet(words.begin(), words.end());
}

/// Heuristic syllable count: maximal vowel groups (a e i o u y), minus one
/// for a trailing silent 'e' unless the word ends in consonant+"le",
/// clamped to at least 1. Throws EmptyWordError when no letters remain
/// after stripping.
inline int count_syllables(std::string_view word) {
  std::string letters;
  letters.reserve(word.size());
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      letters.push_back(detail::ascii_lower(c));
    }
  }
  if (letters.empty()) throw EmptyWordError(std::string(word));

  auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };

  int groups = 0;
  bool in_group = false;
  for (char c : letters) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }

  if (letters.back() == 'e') {
    const std::size_t n = letters.size();
    const bool consonant_le =
        n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
    if (!consonant_le) --groups;
  }

  return std::max(groups, 1);
}

/// Jaccard similarity |a ∩ b| / |a ∪ b|. Two empty sets count as duplicates
/// and score 1.0.
inline double jaccard_similarity(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t intersection = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++intersection;
      ++ia;
      ++ib;
    }
  }
  const std::size_t unions = a.size() + b.size() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(unions);
}

}  // namespace bibweave::textkit

#endif  // BIBWEAVE_TEXTKIT_HPP
