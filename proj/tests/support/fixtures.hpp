#ifndef BIBWEAVE_TESTS_FIXTURES_HPP
#define BIBWEAVE_TESTS_FIXTURES_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bibweave/pipeline.hpp"

// Deterministic end-to-end fixture: an 8-config sweep, handwritten texts
// for every completion the pipeline will request, and a builder that
// computes the matching fingerprints through the library and writes the
// replay file.

namespace testsupport {

namespace fs = std::filesystem;
using bibweave::GenerationConfig;
using bibweave::generation::BibliographyTask;
using bibweave::generation::CandidateAnnotation;
using bibweave::generation::SourceEntry;
using bibweave::provider::CompletionRequest;
using bibweave::provider::ProviderProfile;

inline ProviderProfile make_profile(const std::string& name,
                                    const std::string& model,
                                    bool supports_top_k = true,
                                    const std::string& base_url =
                                        "http://127.0.0.1:9") {
  ProviderProfile profile;
  profile.name = name;
  profile.base_url = base_url;  // port 9/discard: any live call fails fast
  profile.model = model;
  profile.api_key_env = "BIBWEAVE_TEST_KEY";
  profile.supports_top_k = supports_top_k;
  profile.max_retries = 2;
  profile.timeout_seconds = 5.0;
  return profile;
}

inline BibliographyTask make_task() {
  BibliographyTask task;
  task.topic = "ensemble methods for automated literature summaries";
  task.sources = {
      SourceEntry{{"Rivera, M.", "Chen, L."},
                  "Ensemble strategies for text generation",
                  2019,
                  std::string("Journal of Computational Linguistics"),
                  std::string("doi:10.1000/jcl.2019.42")},
      SourceEntry{{"Okafor, T."},
                  "Judging machine written summaries",
                  2021,
                  std::string("Text Quality Review"),
                  std::nullopt},
      SourceEntry{{"Novak, P.", "Iyer, S."},
                  "Redundancy detection in generated text",
                  2022,
                  std::nullopt,
                  std::string("arXiv:2202.01234")},
  };
  task.entry_count = 3;
  task.annotation_sentences = 3;
  return task;
}

inline bibweave::pipeline::RunConfig make_replay_config(const fs::path& work_dir) {
  bibweave::pipeline::RunConfig config;
  config.task = make_task();
  config.grid = bibweave::generation::default_grid();
  config.profiles["gen"] = make_profile("gen", "stub-writer");
  config.profiles["judge"] = make_profile("judge", "stub-judge");
  config.profiles["sum"] = make_profile("sum", "stub-editor");
  config.generator_profile = "gen";
  config.judge_profile = "judge";
  config.summarizer_profile = "sum";
  config.m = 3;
  config.parallelism = 2;
  config.cache_dir = work_dir / "cache";
  config.output_dir = work_dir / "run";
  config.replay_file = work_dir / "replay.jsonl";
  config.backend_mode = bibweave::pipeline::BackendMode::Replay;
  return config;
}

/// Eight handwritten drafts with deliberately different verbosity.
inline std::vector<std::string> candidate_texts(const BibliographyTask& task) {
  const std::string c1 = bibweave::generation::render_citation_line(task.sources[0]);
  const std::string c2 = bibweave::generation::render_citation_line(task.sources[1]);
  const std::string c3 = bibweave::generation::render_citation_line(task.sources[2]);
  return {
      c1 + "\nThis article surveys ensemble strategies for generated text and "
           "maps when combining outputs pays off. The treatment is careful "
           "although several experiments use small corpora.\n" +
          c2 + "\nThe study proposes judged quality scores for machine written "
               "summaries. Its protocol is replicable and clearly motivated.\n" +
          c3 + "\nThe authors detect repeated content across generated "
               "passages. A practical contribution with a narrow evaluation.",

      c1 + "\nA broad survey of combination strategies, strongest when "
           "contrasting selection with fusion. Some sections feel dated.\n" +
          c2 + "\nIntroduces a rating protocol for summary quality with human "
               "agreement analysis. The sample is modest but the design is "
               "sound.\n" +
          c3 + "\nFrames duplicate detection as a similarity search problem. "
               "Results transfer well to bibliography generation.",

      c1 + "\nThe survey organizes ensemble work into selection, voting, and "
           "fusion families, and it argues convincingly that diversity among "
           "members is the decisive ingredient for downstream quality. "
           "Coverage of older statistical systems is thorough.\n" +
          c2 + "\nThis paper builds a judged scoring rubric for summaries and "
               "validates it against expert annotation, reporting encouraging "
               "agreement. A strong methodological reference despite its "
               "focus on news text.\n" +
          c3 + "\nThe redundancy detector compares sentence token sets and "
               "flags near duplicates with high precision. The evaluation is "
               "brief yet persuasive for practical use.",

      c1 + "\nUseful taxonomy of ensembles, though the empirical section "
           "lags the framing. Good entry point for newcomers.\n" +
          c2 + "\nCareful rating methodology with transparent criteria. "
               "Generalization beyond news remains untested.\n" +
          c3 + "\nSolid engineering work on duplicate removal with clear "
               "ablations. Limited theoretical depth.",

      c1 + "\nAn opinionated survey that favors selection style ensembles "
           "and backs the preference with consistent gains on three tasks. "
           "The writing is crisp.\n" +
          c2 + "\nDefines judged evaluation criteria that travel well to other "
               "generation tasks. The agreement study is the main strength.\n" +
          c3 + "\nProposes a lightweight redundancy filter that needs no "
               "training data. Evaluation on bibliographies is missing.",

      c1 + "\nThe strongest part of this survey is its failure analysis, "
           "which shows where ensembles stop helping. Highly relevant here.\n" +
          c2 + "\nA rigorous rating protocol with published prompts and "
               "scales. It directly informs judge design for this task.\n" +
          c3 + "\nThe similarity based filter removes repeated claims while "
               "keeping coverage. Exactly the refinement step this pipeline "
               "needs.",

      c1 + "\nSurvey of ensembles. Readable but shallow on evaluation.\n" +
          c2 + "\nRating study for summaries. Narrow scope.\n" +
          c3 + "\nDuplicate detection note. Thin experiments.",

      c1 + "\nThis survey contrasts voting and fusion on generation tasks "
           "and carefully documents compute costs, a rare and useful angle. "
           "Some cited baselines are weak.\n" +
          c2 + "\nThe rating framework separates relevance from fluency and "
               "shows judges agree most on relevance. Valuable design "
               "guidance for automated evaluation.\n" +
          c3 + "\nThe paper measures redundancy across sampled generations "
               "and shows simple token overlap already catches most repeats. "
               "A pragmatic result that ages well.",
  };
}

/// Judge replies, varied formats on purpose. Overall scores come out to
/// {6, 6.1, 8, 7, 8, 9, 5, 8}: temperature means 6.05 / 7.5 / 8.5 / 6.5, so
/// Top-Temperature picks 0.8 and Top-3 picks cand-0005, cand-0002, cand-0004.
inline std::string judge_output(std::size_t index) {
  static const std::vector<std::string> kOutputs = {
      "Relevance: 6/10\nAccuracy: 6/10\nCoherence: 6/10\nOverall: 6/10",
      "relevance - 7\naccuracy - 5\ncoherence - 6",
      "Here are my ratings:\nRelevance: 8/10\nAccuracy: 8/10\nCoherence: "
      "8/10\nOverall: 8/10",
      "Coherence: 7/10\nRelevance: 7/10\nAccuracy: 7/10\nOverall: 7/10",
      "Relevance: 8.5/10\nAccuracy: 7.5/10\nCoherence: 8/10\nOverall: 8/10",
      "Relevance: 9/10\nAccuracy: 9/10\nCoherence: 9/10\nOverall: 9/10",
      "Relevance: 5/10\nAccuracy: 5/10\nCoherence: 4/10\nOverall: 5/10",
      "Relevance: 8/10\nAccuracy: 8/10\nCoherence: 7/10\nOverall: 8/10",
  };
  return kOutputs.at(index);
}

inline std::string top_m_summary(const BibliographyTask& task) {
  const std::string c1 = bibweave::generation::render_citation_line(task.sources[0]);
  const std::string c2 = bibweave::generation::render_citation_line(task.sources[1]);
  const std::string c3 = bibweave::generation::render_citation_line(task.sources[2]);
  return "1. " + c1 +
         "\nThe survey sorts ensemble work into selection, voting, and "
         "fusion families. Diversity among members emerges as the decisive "
         "ingredient. Its failure analysis shows where combining stops "
         "helping.\n"
         "2. " + c2 +
         "\nThe study validates a judged scoring rubric against expert "
         "annotation with encouraging agreement. Published prompts and "
         "scales make the protocol reusable.\n"
         "3. " + c3 +
         "\nToken overlap between sentences already catches most repeated "
         "claims. The filter needs no training data and keeps coverage "
         "intact.\n";
}

/// Contains one exact duplicate sentence across entries, so the replay run
/// exercises redundancy removal (dedup log of length 1).
inline std::string top_temperature_summary(const BibliographyTask& task) {
  const std::string c1 = bibweave::generation::render_citation_line(task.sources[0]);
  const std::string c2 = bibweave::generation::render_citation_line(task.sources[1]);
  const std::string c3 = bibweave::generation::render_citation_line(task.sources[2]);
  return "1. " + c1 +
         "\nAn opinionated survey that favors selection style ensembles and "
         "documents consistent gains. Ensemble selection clearly beats "
         "single outputs here.\n"
         "2. " + c2 +
         "\nThe rating protocol publishes its prompts and scales, which "
         "directly informs judge design. The agreement study is the main "
         "strength.\n"
         "3. " + c3 +
         "\nEnsemble selection clearly beats single outputs here. The "
         "lightweight redundancy filter removes repeated claims while "
         "keeping coverage.\n";
}

struct FixtureOptions {
  // Replaces the judge reply for a candidate index (first attempt).
  std::map<std::size_t, std::string> judge_override;
  // Reply for the retried (format-reminder) judge prompt, when wanted.
  std::map<std::size_t, std::string> judge_retry_reply;
  // Leave these generation fingerprints unrecorded.
  std::set<std::size_t> omit_generation;
};

/// Computes every fingerprint the pipeline will ask for and writes the
/// replay file next to the config. Selection for the summarizer entries is
/// derived through the library itself from whatever judge replies parse.
inline void write_replay_fixture(const bibweave::pipeline::RunConfig& config,
                                 const FixtureOptions& options = {}) {
  namespace gen = bibweave::generation;
  namespace judging = bibweave::judging;
  namespace selection = bibweave::selection;
  namespace refinement = bibweave::refinement;
  namespace provider = bibweave::provider;

  const auto& task = config.task;
  const auto configs = gen::expand_grid(config.grid);
  const auto texts = candidate_texts(task);
  const auto gen_prompts = gen::build_generation_prompt(task);

  provider::ReplayWriter writer(config.replay_file);

  std::vector<CandidateAnnotation> candidates;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CompletionRequest request{gen_prompts.system_prompt,
                              gen_prompts.user_prompt, configs[i],
                              config.max_tokens.generation};
    const std::string fp = provider::fingerprint(config.generator(), request);
    const std::string& text = texts.at(i % texts.size());
    if (options.omit_generation.count(i) == 0) writer.record(fp, text);
    candidates.push_back(CandidateAnnotation{gen::candidate_id(i), configs[i],
                                             text, fp});
  }

  const GenerationConfig judge_config{0.0, std::nullopt, 1.0, 0};
  std::vector<judging::RatingReport> reports;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto prompts = judging::build_judge_prompt(task, candidates[i],
                                                     config.rubric);
    CompletionRequest request{prompts.system_prompt, prompts.user_prompt,
                              judge_config, config.max_tokens.judging};
    auto override_it = options.judge_override.find(i);
    const std::string reply = override_it != options.judge_override.end()
                                  ? override_it->second
                                  : judge_output(i % 8);
    writer.record(provider::fingerprint(config.judge(), request), reply);

    auto retry_it = options.judge_retry_reply.find(i);
    if (retry_it != options.judge_retry_reply.end()) {
      CompletionRequest retry = request;
      retry.user_prompt += judging::format_reminder();
      writer.record(provider::fingerprint(config.judge(), retry),
                    retry_it->second);
    }

    try {
      reports.push_back(
          judging::parse_ratings(reply, config.rubric, candidates[i].id));
    } catch (const judging::RatingParseError&) {
      if (retry_it != options.judge_retry_reply.end()) {
        try {
          reports.push_back(judging::parse_ratings(retry_it->second,
                                                   config.rubric,
                                                   candidates[i].id));
        } catch (const judging::RatingParseError&) {
        }
      }
    }
  }

  if (reports.size() < 2) return;  // run will stop at the judge stage anyway

  const auto stats = selection::aggregate(reports, candidates);
  const auto top_temperature =
      selection::select_top_temperature(candidates, reports, stats);
  const auto top_m = selection::select_top_m(candidates, reports, config.m);

  const GenerationConfig summarizer_config{config.summarizer_temperature,
                                           std::nullopt, 1.0, 0};
  auto record_summary = [&](const selection::SelectionResult& chosen,
                            const std::string& summary) {
    std::vector<CandidateAnnotation> selected;
    for (const auto& id : chosen.chosen) {
      for (const auto& candidate : candidates) {
        if (candidate.id == id) selected.push_back(candidate);
      }
    }
    const auto prompts = refinement::build_summarize_prompt(task, selected);
    CompletionRequest request{prompts.system_prompt, prompts.user_prompt,
                              summarizer_config,
                              config.max_tokens.summarization};
    writer.record(provider::fingerprint(config.summarizer(), request), summary);
  };
  record_summary(top_m, top_m_summary(task));
  record_summary(top_temperature, top_temperature_summary(task));
}

}  // namespace testsupport

#endif  // BIBWEAVE_TESTS_FIXTURES_HPP
