#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "adrpipe/corpus.hpp"
#include "adrpipe/delimited.hpp"
#include "adrpipe/harness.hpp"
#include "adrpipe/text.hpp"

#ifndef ADRPIPE_SOURCE_DIR
#define ADRPIPE_SOURCE_DIR "."
#endif

namespace adrtest {

inline std::filesystem::path source_dir() {
  if (const char* env = std::getenv("ADRPIPE_SOURCE_DIR"); env && *env) return env;
  return ADRPIPE_SOURCE_DIR;
}

inline std::filesystem::path fixtures_dir() { return source_dir() / "tests" / "fixtures"; }

inline nlohmann::json fixture_counts() {
  return nlohmann::json::parse(adrpipe::read_text_file(fixtures_dir() / "counts.json"));
}

inline std::filesystem::path cli_path() {
  if (const char* env = std::getenv("ADRPIPE_BIN"); env && *env) return env;
  return source_dir() / "build" / "tools" / "adrpipe";
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 gen{0xADBEEF};
  const auto dir =
      std::filesystem::temp_directory_path() / ("adrpipe-test-" + tag + "-" + std::to_string(gen()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline adrpipe::Review make_review(std::string id, std::string drug, std::string text,
                                   std::optional<int> rating = std::nullopt) {
  adrpipe::Review review;
  review.id = std::move(id);
  review.drug = adrpipe::normalize_drug(drug);
  review.rating = rating;
  review.text = std::move(text);
  return review;
}

// Appends a gold entity over the first occurrence of `phrase` in the review
// text (code-point offsets). The search is an independent path from the
// loaders' own offset logic.
inline void add_entity(adrpipe::Corpus& corpus, const std::string& review_id,
                       const std::string& phrase, adrpipe::Label label,
                       std::optional<std::string> original_type = std::nullopt,
                       adrpipe::Provenance provenance = adrpipe::Provenance::Gold,
                       std::optional<double> confidence = std::nullopt) {
  const adrpipe::Review& review = corpus.reviews.at(review_id);
  const std::u32string text = adrpipe::decode_utf8(review.text);
  const std::u32string needle = adrpipe::decode_utf8(phrase);
  const std::size_t pos = text.find(needle);
  if (pos == std::u32string::npos) throw std::runtime_error("phrase not in fixture text: " + phrase);
  adrpipe::LabeledEntity entity;
  entity.span.review_id = review_id;
  entity.span.fragments = {{pos, pos + needle.size()}};
  entity.span.surface = phrase;
  entity.label = label;
  entity.provenance = provenance;
  entity.confidence = confidence;
  entity.original_type = std::move(original_type);
  corpus.entities.push_back(std::move(entity));
}

inline void finalize(adrpipe::Corpus& corpus) {
  adrpipe::canonicalize(corpus);
  adrpipe::validate(corpus);
}

// A small separable corpus: surface decides the label, contexts are neutral.
// Every review carries one ADR and one NonADR entity, so any fold split keeps
// both classes on both sides and every surface stays visible in training
// (each surface occurs in `rounds` reviews and fold sizes stay below that).
inline adrpipe::Corpus toy_corpus(const std::string& name, int rounds = 3) {
  const std::vector<std::string> adr = {"nausea", "severe headache", "vomiting"};
  const std::vector<std::string> non = {"asthma", "arthritis", "diabetes"};
  adrpipe::Corpus corpus;
  corpus.name = name;
  int serial = 0;
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < adr.size(); ++i) {
      const std::string id = name + "-r" + std::to_string(serial++);
      corpus.reviews.emplace(
          id, make_review(id, r % 2 ? "DRUGA" : "DRUGB",
                          "I noticed " + adr[i] + " and " + non[i] + " yesterday"));
      add_entity(corpus, id, adr[i], adrpipe::Label::ADR, "ADR");
      add_entity(corpus, id, non[i], adrpipe::Label::NonADR, "Disease");
    }
  }
  finalize(corpus);
  return corpus;
}

// Independent confusion-matrix counter used as the metrics oracle.
struct BruteMetrics {
  double adr_p, adr_r, adr_f, non_p, non_r, non_f, macro_p, macro_r, macro_f;
};

inline BruteMetrics brute_force_metrics(const std::vector<adrpipe::Label>& gold,
                                        const std::vector<adrpipe::Label>& pred) {
  auto one_class = [&](adrpipe::Label positive, double* p, double* r, double* f) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == positive;
      const bool q = pred[i] == positive;
      if (g && q) ++tp;
      if (!g && q) ++fp;
      if (g && !q) ++fn;
    }
    *p = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
    *r = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
    *f = (*p + *r) > 0 ? 2.0 * *p * *r / (*p + *r) : 0.0;
  };
  BruteMetrics m{};
  one_class(adrpipe::Label::ADR, &m.adr_p, &m.adr_r, &m.adr_f);
  one_class(adrpipe::Label::NonADR, &m.non_p, &m.non_r, &m.non_f);
  m.macro_p = (m.adr_p + m.non_p) / 2;
  m.macro_r = (m.adr_r + m.non_r) / 2;
  m.macro_f = (m.adr_f + m.non_f) / 2;
  return m;
}

// Gold entities and matching predictions for a synthetic label sequence.
inline std::pair<std::vector<adrpipe::LabeledEntity>, std::vector<adrpipe::Prediction>>
aligned_instance(const std::vector<adrpipe::Label>& gold, const std::vector<adrpipe::Label>& pred) {
  std::vector<adrpipe::LabeledEntity> gold_entities;
  std::vector<adrpipe::Prediction> predictions;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    adrpipe::LabeledEntity entity;
    entity.span.review_id = "r" + std::to_string(i);
    entity.span.fragments = {{0, 1}};
    entity.span.surface = "x";
    entity.label = gold[i];
    gold_entities.push_back(entity);

    adrpipe::Prediction p;
    p.review_id = entity.span.review_id;
    p.span = entity.span;
    p.label = pred[i];
    p.score = pred[i] == adrpipe::Label::ADR ? 0.9 : 0.1;
    predictions.push_back(p);
  }
  return {gold_entities, predictions};
}

}  // namespace adrtest
