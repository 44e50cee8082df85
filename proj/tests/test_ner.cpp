#include "doctest.h"

#include "adrpipe/delimited.hpp"
#include "adrpipe/ner.hpp"
#include "adrpipe/text.hpp"

#include "support.hpp"

using namespace adrpipe;
namespace fs = std::filesystem;

namespace {

Corpus corpus_with_surfaces(const std::vector<std::string>& surfaces) {
  Corpus corpus;
  corpus.name = "gaz";
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const std::string id = "g" + std::to_string(i);
    corpus.reviews.emplace(id, adrtest::make_review(id, "D", "I noticed " + surfaces[i] + " today"));
    adrtest::add_entity(corpus, id, surfaces[i], Label::ADR, "ADR");
  }
  adrtest::finalize(corpus);
  return corpus;
}

}  // namespace

TEST_CASE("build_gazetteer collects normalized surfaces") {
  const Corpus corpus = corpus_with_surfaces({"nausea", "severe headache"});
  const Gazetteer gaz = build_gazetteer(corpus);
  CHECK(gaz.phrase_count() == 2);
  CHECK(gaz.max_phrase_tokens() == 2);
  CHECK(gaz.contains("nausea"));
  CHECK(gaz.contains("severe headache"));
}

TEST_CASE("build_gazetteer deduplicates surfaces") {
  const Corpus corpus = corpus_with_surfaces({"Nausea", "nausea", "NAUSEA "});
  CHECK(build_gazetteer(corpus).phrase_count() == 1);
}

TEST_CASE("build_gazetteer rejects an empty corpus") {
  Corpus corpus;
  corpus.name = "empty";
  CHECK_THROWS_AS(build_gazetteer(corpus), config_error);
}

TEST_CASE("gazetteer phrase count equals the distinct normalized surfaces") {
  const Corpus corpus = load_cadec(adrtest::fixtures_dir() / "cadec_synth");
  // independent set construction over the loaded corpus
  std::set<std::string> expected;
  for (const LabeledEntity& entity : corpus.entities) {
    const std::string phrase = normalize_phrase(entity.span.surface);
    if (!tokenize_lower(phrase).empty()) expected.insert(phrase);
  }
  CHECK(build_gazetteer(corpus).phrase_count() == expected.size());
}

TEST_CASE("longest match wins") {
  const Corpus corpus = corpus_with_surfaces({"headache", "severe headache"});
  const Gazetteer gaz = build_gazetteer(corpus);
  const Review review = adrtest::make_review("r", "D", "I had a severe headache today");
  const std::vector<EntitySpan> spans = extract_entities(gaz, review);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].surface == "severe headache");
  CHECK(spans[0].fragments == std::vector<std::pair<std::size_t, std::size_t>>{{8, 23}});
}

TEST_CASE("no matches give an empty list") {
  const Gazetteer gaz = build_gazetteer(corpus_with_surfaces({"nausea"}));
  CHECK(extract_entities(gaz, adrtest::make_review("r", "D", "all quiet here")).empty());
}

TEST_CASE("repeated token matches every occurrence") {
  const Gazetteer gaz = build_gazetteer(corpus_with_surfaces({"pain"}));
  const std::string text = "pain, pain, pain";
  const Review review = adrtest::make_review("r", "D", text);
  const std::vector<EntitySpan> spans = extract_entities(gaz, review);

  // brute-force scan oracle over the raw text
  std::vector<std::pair<std::size_t, std::size_t>> expected;
  const std::u32string cps = decode_utf8(text);
  for (const Token& token : tokenize(cps)) {
    if (encode_utf8(token.text) == "pain") expected.push_back({token.begin, token.end});
  }
  REQUIRE(expected.size() == 3);
  CHECK(expected == std::vector<std::pair<std::size_t, std::size_t>>{{0, 4}, {6, 10}, {12, 16}});

  REQUIRE(spans.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(spans[i].fragments == std::vector<std::pair<std::size_t, std::size_t>>{expected[i]});
    CHECK(spans[i].surface == "pain");
  }
}

TEST_CASE("matching is case-insensitive and whole-token") {
  const Gazetteer gaz = build_gazetteer(corpus_with_surfaces({"ache"}));
  CHECK(extract_entities(gaz, adrtest::make_review("r", "D", "my headache")).empty());
  CHECK(extract_entities(gaz, adrtest::make_review("r", "D", "the ACHE returned")).size() == 1);
}

TEST_CASE("punctuation inside the slice blocks a multi-token match") {
  const Gazetteer gaz = build_gazetteer(corpus_with_surfaces({"severe headache", "headache"}));
  const std::vector<EntitySpan> spans =
      extract_entities(gaz, adrtest::make_review("r", "D", "severe, headache"));
  REQUIRE(spans.size() == 1);  // falls back to the single-token phrase
  CHECK(spans[0].surface == "headache");
}

TEST_CASE("extraction properties on generated corpora") {
  std::mt19937_64 gen(2024);
  const std::vector<std::string> vocab = {"nausea",       "severe headache", "stomach pain",
                                          "vomiting",     "asthma",          "muscle cramps",
                                          "dry mouth",    "arthritis",       "panic attack",
                                          "night sweats"};
  const std::vector<std::string> filler = {"today", "again", "doctor", "said", "mild", "but"};
  for (int trial = 0; trial < 30; ++trial) {
    // corpus the gazetteer is built from
    Corpus corpus;
    corpus.name = "prop";
    const std::size_t n_phrases = 2 + gen() % 6;
    std::vector<std::string> used;
    for (std::size_t i = 0; i < n_phrases; ++i) used.push_back(vocab[gen() % vocab.size()]);
    for (std::size_t i = 0; i < used.size(); ++i) {
      const std::string id = "p" + std::to_string(i);
      std::string text = filler[gen() % filler.size()] + " " + used[i];
      if (gen() % 2) text += " " + filler[gen() % filler.size()];
      corpus.reviews.emplace(id, adrtest::make_review(id, "D", text));
      adrtest::add_entity(corpus, id, used[i], gen() % 2 ? Label::ADR : Label::NonADR);
    }
    adrtest::finalize(corpus);
    const Gazetteer gaz = build_gazetteer(corpus);

    // non-overlap and membership on random text made of vocab + filler
    std::string text;
    for (int w = 0; w < 12; ++w) {
      if (!text.empty()) text += " ";
      text += (gen() % 3 == 0) ? vocab[gen() % vocab.size()] : filler[gen() % filler.size()];
    }
    const Review review = adrtest::make_review("r", "D", text);
    const std::vector<EntitySpan> spans = extract_entities(gaz, review);
    std::size_t prev_end = 0;
    bool first = true;
    for (const EntitySpan& span : spans) {
      REQUIRE(span.fragments.size() == 1);
      if (!first) CHECK(span.fragments[0].first >= prev_end);
      prev_end = span.fragments[0].second;
      first = false;
      CHECK(gaz.contains(normalize_phrase(span.surface)));
    }

    // recall-on-train: every contiguous gold location is covered by a span
    for (const LabeledEntity& entity : corpus.entities) {
      if (entity.span.fragments.size() != 1) continue;
      const Review& gold_review = corpus.reviews.at(entity.span.review_id);
      const std::vector<EntitySpan> found = extract_entities(gaz, gold_review);
      const auto [gb, ge] = entity.span.fragments[0];
      bool covered = false;
      for (const EntitySpan& span : found) {
        if (span.fragments[0].first < ge && gb < span.fragments[0].second) covered = true;
      }
      CHECK(covered);
    }
  }
}

TEST_CASE("external tagger adapter round trips spans") {
  const std::string stub = (adrtest::fixtures_dir() / "stub_tagger.py").string();
  const ExternalTagger tagger("python3 " + stub);
  const Review review = adrtest::make_review("r1", "D", "felt nausea today");
  const std::vector<EntitySpan> spans = extract_entities(tagger, review);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].surface == "nausea");
  CHECK(spans[0].fragments == std::vector<std::pair<std::size_t, std::size_t>>{{5, 11}});
}

TEST_CASE("misbehaving external tagger is rejected") {
  const std::string stub = (adrtest::fixtures_dir() / "stub_tagger_bad.py").string();
  const ExternalTagger tagger("python3 " + stub);
  const Review review = adrtest::make_review("r1", "D", "felt nausea today");
  CHECK_THROWS_AS(extract_entities(tagger, review), integrity_error);
}
