#include "adrpipe/pseudo.hpp"

#include <algorithm>

#include "json.hpp"

#include "adrpipe/delimited.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::Full:
      return "full";
    case SelectionKind::TargetDrugs:
      return "target_drugs";
    case SelectionKind::MinRating:
      return "min_rating";
  }
  return "full";
}

SelectionKind selection_kind_from_string(std::string_view s) {
  if (s == "full") return SelectionKind::Full;
  if (s == "target_drugs") return SelectionKind::TargetDrugs;
  if (s == "min_rating") return SelectionKind::MinRating;
  throw value_error("unknown selection strategy: " + std::string(s));
}

std::vector<Review> select(const std::vector<Review>& reviews, const SelectionStrategy& strategy) {
  switch (strategy.kind) {
    case SelectionKind::Full:
      return reviews;
    case SelectionKind::TargetDrugs: {
      if (strategy.drugs.empty())
        throw config_error("target_drugs selection requires a non-empty drug set");
      std::vector<Review> out;
      for (const Review& review : reviews) {
        if (strategy.drugs.count(review.drug)) out.push_back(review);
      }
      return out;
    }
    case SelectionKind::MinRating: {
      std::vector<Review> out;
      for (const Review& review : reviews) {
        if (review.rating && *review.rating == strategy.rating_threshold) out.push_back(review);
      }
      return out;
    }
  }
  return reviews;
}

PseudoSet pseudo_annotate(const Tagger& tagger, const Classifier& classifier,
                          const std::vector<Review>& reviews, const AnnotateOptions& options) {
  PseudoSet set;
  set.strategy = options.strategy;
  set.source_model_id = classifier.id();

  for (const Review& review : reviews) {
    if (options.exclude_texts.count(review.text)) continue;

    const std::vector<EntitySpan> spans = extract_entities(tagger, review);
    std::vector<EntityInContext> inputs;
    inputs.reserve(spans.size());
    for (const EntitySpan& span : spans) inputs.push_back(make_context(review, span, options.window));
    const std::vector<Prediction> predictions = predict(classifier, inputs, spans);

    if (options.adr_texts_only) {
      const bool has_adr = std::any_of(predictions.begin(), predictions.end(),
                                       [](const Prediction& p) { return p.label == Label::ADR; });
      if (!has_adr) continue;
    }

    set.review_ids.push_back(review.id);
    for (const Prediction& p : predictions) {
      LabeledEntity entity;
      entity.span = p.span;
      entity.label = p.label;
      entity.provenance = Provenance::Pseudo;
      entity.confidence = p.score;
      set.entities.push_back(std::move(entity));
    }
  }
  set.review_count = set.review_ids.size();
  return set;
}

std::vector<LabeledEntity> augment(const std::vector<LabeledEntity>& gold, const PseudoSet& pseudo,
                                   double confidence_floor) {
  if (confidence_floor < 0.0) throw config_error("confidence_floor must be non-negative");
  std::vector<LabeledEntity> out = gold;
  for (const LabeledEntity& entity : pseudo.entities) {
    if (entity.confidence && *entity.confidence >= confidence_floor) out.push_back(entity);
  }
  return out;
}

void save_pseudo_set(const PseudoSet& set, const std::vector<Review>& review_pool,
                     const fs::path& entities_file, const fs::path& manifest_file) {
  Corpus corpus;
  corpus.name = "pseudo:" + set.source_model_id;
  std::unordered_set<std::string> keep(set.review_ids.begin(), set.review_ids.end());
  for (const Review& review : review_pool) {
    if (keep.count(review.id)) corpus.reviews.emplace(review.id, review);
  }
  if (corpus.reviews.size() != set.review_ids.size())
    throw integrity_error("pseudo set references reviews missing from the pool");
  corpus.entities = set.entities;
  canonicalize(corpus);
  validate(corpus);
  save_interchange(corpus, entities_file);

  std::size_t adr = 0;
  for (const LabeledEntity& entity : set.entities) {
    if (entity.label == Label::ADR) ++adr;
  }
  json manifest{{"source_model_id", set.source_model_id},
                {"strategy",
                 {{"kind", std::string(to_string(set.strategy.kind))},
                  {"drugs", std::vector<std::string>(set.strategy.drugs.begin(),
                                                     set.strategy.drugs.end())},
                  {"rating_threshold", set.strategy.rating_threshold}}},
                {"review_count", set.review_count},
                {"entity_count", set.entities.size()},
                {"adr_count", adr},
                {"non_adr_count", set.entities.size() - adr}};
  write_text_file(manifest_file, manifest.dump(2) + "\n");
}

PseudoLoad load_pseudo_set(const fs::path& entities_file, const fs::path& manifest_file) {
  const Corpus corpus = load_interchange(entities_file);
  const json manifest = json::parse(read_text_file(manifest_file));

  PseudoLoad out;
  out.set.source_model_id = manifest.at("source_model_id").get<std::string>();
  out.set.strategy.kind =
      selection_kind_from_string(manifest.at("strategy").at("kind").get<std::string>());
  for (const auto& drug : manifest.at("strategy").at("drugs"))
    out.set.strategy.drugs.insert(drug.get<std::string>());
  out.set.strategy.rating_threshold = manifest.at("strategy").at("rating_threshold").get<int>();
  out.set.review_count = manifest.at("review_count").get<std::size_t>();
  out.set.entities = corpus.entities;
  for (const auto& [id, review] : corpus.reviews) {
    out.set.review_ids.push_back(id);
    out.reviews.push_back(review);
  }
  if (out.set.review_count != out.set.review_ids.size())
    throw integrity_error("pseudo manifest review_count does not match the entities file");
  return out;
}

}  // namespace adrpipe
