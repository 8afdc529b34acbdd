#include "bibweave/textkit.hpp"

#include <random>
#include <sstream>

#include "catch2/catch_amalgamated.hpp"

using namespace bibweave::textkit;

namespace {

std::vector<std::string> sentence_texts(const std::vector<Sentence>& sentences) {
  std::vector<std::string> texts;
  for (const auto& s : sentences) texts.push_back(s.text);
  return texts;
}

std::string join_with_spaces(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += " ";
    out += s.text;
  }
  return out;
}

}  // namespace

TEST_CASE("split_sentences handles plain sentences") {
  CHECK(sentence_texts(split_sentences("A b. C d!")) ==
        std::vector<std::string>{"A b.", "C d!"});
}

TEST_CASE("split_sentences on empty input") {
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   \n\t ").empty());
}

TEST_CASE("split_sentences respects the abbreviation list") {
  CHECK(sentence_texts(split_sentences("Dr. Smith wrote. It helped.")) ==
        std::vector<std::string>{"Dr. Smith wrote.", "It helped."});
  CHECK(sentence_texts(split_sentences("See Fig. 3 for data. Then stop.")) ==
        std::vector<std::string>{"See Fig. 3 for data.", "Then stop."});
  CHECK(sentence_texts(split_sentences("Smith et al. showed X. Y holds.")) ==
        std::vector<std::string>{"Smith et al. showed X.", "Y holds."});
  CHECK(sentence_texts(split_sentences("Use it, e.g. daily. Fine.")) ==
        std::vector<std::string>{"Use it, e.g. daily.", "Fine."});
  // Lowercase "no." is not in the list; capitalized "No." is.
  CHECK(sentence_texts(split_sentences("He said no. It was true.")) ==
        std::vector<std::string>{"He said no.", "It was true."});
  CHECK(sentence_texts(split_sentences("See No. 5 here. Done.")) ==
        std::vector<std::string>{"See No. 5 here.", "Done."});
}

TEST_CASE("split_sentences abbreviation needs a word boundary") {
  // "badr." ends with "dr." but not "Dr.", and "aDr." has no boundary.
  CHECK(sentence_texts(split_sentences("It was aDr. Next one.")) ==
        std::vector<std::string>{"It was aDr.", "Next one."});
}

TEST_CASE("split_sentences keeps decimals and tight dots intact") {
  CHECK(sentence_texts(split_sentences("Pi is 3.14 about. Next.")) ==
        std::vector<std::string>{"Pi is 3.14 about.", "Next."});
}

TEST_CASE("split_sentences keeps a trailing fragment without terminator") {
  CHECK(sentence_texts(split_sentences("Done. trailing words")) ==
        std::vector<std::string>{"Done.", "trailing words"});
}

TEST_CASE("split_sentences assigns ordinal indexes") {
  const auto sentences = split_sentences("One. Two! Three?");
  REQUIRE(sentences.size() == 3);
  CHECK(sentences[0].index == 0);
  CHECK(sentences[1].index == 1);
  CHECK(sentences[2].index == 2);
}

TEST_CASE("split_sentences round trip is stable") {
  const std::vector<std::string> inputs = {
      "A b. C d!",
      "Dr. Smith wrote. It helped.",
      "Multiple   spaces.   And tabs.\tAnd newlines.\nLast one",
      "One. Two! Three? Four",
      "Use it, e.g. daily. See Vol. 2 pp. 10 here. Fine.",
  };
  for (const auto& input : inputs) {
    const auto once = split_sentences(input);
    const auto twice = split_sentences(join_with_spaces(once));
    CHECK(once == twice);
  }
}

TEST_CASE("split_sentences round trip on random sentence soup") {
  std::mt19937 rng(20240811);
  const std::vector<std::string> words = {"alpha", "beta",  "gamma", "delta",
                                          "the",   "model", "rates", "Dr."};
  const std::string terminators = ".!?";
  for (int iteration = 0; iteration < 100; ++iteration) {
    std::ostringstream text;
    const int sentence_count = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < sentence_count; ++s) {
      const int word_count = 1 + static_cast<int>(rng() % 7);
      for (int w = 0; w < word_count; ++w) {
        if (w > 0) text << " ";
        text << words[rng() % words.size()];
      }
      text << terminators[rng() % terminators.size()];
      if (s + 1 < sentence_count) text << " ";
    }
    const auto once = split_sentences(text.str());
    const auto twice = split_sentences(join_with_spaces(once));
    CHECK(once == twice);
  }
}

TEST_CASE("tokenize folds case and punctuation") {
  CHECK(tokenize("The cat, the CAT.") == TokenSet{"the", "cat"});
  CHECK(tokenize("") == TokenSet{});
  CHECK(tokenize("LLM-as-a-judge") == TokenSet{"llm", "as", "a", "judge"});
}

TEST_CASE("tokenize_words keeps multiplicity and order") {
  CHECK(tokenize_words("The cat, the CAT.") ==
        std::vector<std::string>{"the", "cat", "the", "cat"});
}

TEST_CASE("tokenize is invariant under case changes and punctuation") {
  std::mt19937 rng(7);
  const std::vector<std::string> words = {"ensembles", "rate", "judge",
                                          "fusion",    "top",  "m"};
  const std::string punctuation = ",.;:!?-()[]\"'";
  for (int iteration = 0; iteration < 100; ++iteration) {
    std::string plain;
    std::string noisy;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const std::string& word = words[rng() % words.size()];
      plain += word + " ";
      for (char c : word) {
        noisy += (rng() % 2 == 0)
                     ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                     : c;
      }
      noisy += punctuation[rng() % punctuation.size()];
      noisy += " ";
    }
    CHECK(tokenize(plain) == tokenize(noisy));
  }
}

TEST_CASE("count_syllables matches hand-derived values") {
  CHECK(count_syllables("cat") == 1);
  CHECK(count_syllables("table") == 2);   // consonant + "le" keeps the e
  CHECK(count_syllables("see") == 1);     // subtract then clamp to 1
  CHECK(count_syllables("the") == 1);
  CHECK(count_syllables("whole") == 1);   // vowel before "le": silent e
  CHECK(count_syllables("apple") == 2);
  CHECK(count_syllables("syllable") == 3);
  CHECK(count_syllables("reading") == 2);
  CHECK(count_syllables("my") == 1);      // y counts as a vowel
  CHECK(count_syllables("Bibliography") == 4);  // groups i, io, a, y
}

TEST_CASE("count_syllables strips non-letters first") {
  CHECK(count_syllables("cat's") == 1);
  // "cooperate": groups oo, e, a, e; trailing silent e drops one.
  CHECK(count_syllables("co-operate") == 3);
}

TEST_CASE("count_syllables rejects words without letters") {
  CHECK_THROWS_AS(count_syllables(""), EmptyWordError);
  CHECK_THROWS_AS(count_syllables("2024"), EmptyWordError);
  CHECK_THROWS_AS(count_syllables("--"), EmptyWordError);
}

TEST_CASE("count_syllables is at least 1 for random letter strings") {
  std::mt19937 rng(99);
  for (int iteration = 0; iteration < 300; ++iteration) {
    std::string word;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      word.push_back(static_cast<char>('a' + rng() % 26));
    }
    CHECK(count_syllables(word) >= 1);
  }
}

TEST_CASE("jaccard_similarity basics") {
  const TokenSet a{"the", "cat", "sat"};
  CHECK(jaccard_similarity(a, a) == 1.0);
  CHECK(jaccard_similarity(a, TokenSet{"dog", "ran"}) == 0.0);
  CHECK(jaccard_similarity(a, TokenSet{"the", "cat", "slept"}) == 0.5);
  CHECK(jaccard_similarity(TokenSet{}, TokenSet{}) == 1.0);
  CHECK(jaccard_similarity(a, TokenSet{}) == 0.0);
}

TEST_CASE("jaccard_similarity is symmetric and 1 iff equal") {
  std::mt19937 rng(13);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g"};
  for (int iteration = 0; iteration < 200; ++iteration) {
    TokenSet a;
    TokenSet b;
    for (const auto& token : pool) {
      if (rng() % 2 == 0) a.insert(token);
      if (rng() % 2 == 0) b.insert(token);
    }
    const double ab = jaccard_similarity(a, b);
    CHECK(ab == jaccard_similarity(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (!a.empty() || !b.empty()) {
      CHECK((ab == 1.0) == (a == b));
    }
  }
}
