#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "adrpipe/classifier.hpp"
#include "adrpipe/corpus.hpp"
#include "adrpipe/ner.hpp"

namespace adrpipe {

enum class SelectionKind { Full, TargetDrugs, MinRating };

std::string_view to_string(SelectionKind kind);
SelectionKind selection_kind_from_string(std::string_view s);

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::Full;
  std::set<std::string> drugs;   // required iff kind == TargetDrugs
  int rating_threshold = 1;      // MinRating keeps rating == 1 exactly
  bool operator==(const SelectionStrategy&) const = default;
};

// Full: identity. TargetDrugs: reviews whose drug is in the set. MinRating:
// reviews with rating == 1 (missing rating excluded). Order preserved.
std::vector<Review> select(const std::vector<Review>& reviews, const SelectionStrategy& strategy);

struct PseudoSet {
  SelectionStrategy strategy;
  std::vector<LabeledEntity> entities;  // provenance Pseudo, confidence present
  std::string source_model_id;
  std::size_t review_count = 0;
  // ids of the reviews that were annotated (kept), including ones that
  // produced zero entities; review_count == review_ids.size().
  std::vector<std::string> review_ids;
};

struct AnnotateOptions {
  SelectionStrategy strategy;  // recorded in the PseudoSet
  // Reviews whose exact text appears here are skipped (gold-duplicate guard).
  std::unordered_set<std::string> exclude_texts;
  // Keep only reviews for which at least one entity was predicted ADR.
  bool adr_texts_only = false;
  std::optional<int> window;  // context window for classification
};

// Fig-style steps 2-3: extract spans with the tagger, classify each, and
// keep every prediction as a Pseudo entity carrying its score as confidence.
PseudoSet pseudo_annotate(const Tagger& tagger, const Classifier& classifier,
                          const std::vector<Review>& reviews, const AnnotateOptions& options = {});

// Gold entities are always kept; pseudo entities are kept iff their
// confidence reaches the floor. Labels and provenance are never altered.
std::vector<LabeledEntity> augment(const std::vector<LabeledEntity>& gold, const PseudoSet& pseudo,
                                   double confidence_floor = 0.0);

// Persistence: an interchange file of the annotated reviews plus a JSON
// manifest (strategy, model id, counts) so experiments can resume.
void save_pseudo_set(const PseudoSet& set, const std::vector<Review>& review_pool,
                     const std::filesystem::path& entities_file,
                     const std::filesystem::path& manifest_file);

struct PseudoLoad {
  PseudoSet set;
  std::vector<Review> reviews;
};

PseudoLoad load_pseudo_set(const std::filesystem::path& entities_file,
                           const std::filesystem::path& manifest_file);

}  // namespace adrpipe
