#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "adrpipe/corpus.hpp"

namespace adrpipe {

// Tagging contract. Implementations must return non-overlapping spans
// sorted by start offset; extract_entities() re-checks that postcondition
// so external adapters cannot smuggle overlaps into the pipeline.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<EntitySpan> extract(const Review& review) const = 0;
  virtual std::string id() const = 0;
};

// Dictionary of normalized gold-entity surfaces. Matching is whole-token and
// case-insensitive with longest-match-wins, leftmost-first overlap
// resolution; a candidate token window counts as a hit only when its
// normalized text slice is literally one of the phrases.
class Gazetteer final : public Tagger {
 public:
  std::vector<EntitySpan> extract(const Review& review) const override;
  std::string id() const override { return "gazetteer"; }

  std::size_t phrase_count() const { return phrases_.size(); }
  std::size_t max_phrase_tokens() const { return max_phrase_tokens_; }
  bool contains(const std::string& normalized_phrase) const {
    return phrases_.count(normalized_phrase) > 0;
  }

 private:
  friend Gazetteer build_gazetteer(const Corpus& corpus);

  std::unordered_set<std::string> phrases_;      // normalize_phrase() forms
  std::unordered_set<std::string> token_joins_;  // lowercase tokens joined by ' '
  std::size_t max_phrase_tokens_ = 0;
};

// Phrases are the normalized surfaces of all gold entities, both classes.
// Throws config_error when the corpus has no usable entity surface.
Gazetteer build_gazetteer(const Corpus& corpus);

// Runs the tagger and enforces the span postconditions (in-bounds, sorted,
// non-overlapping, surface consistent with the text).
std::vector<EntitySpan> extract_entities(const Tagger& tagger, const Review& review);

// Process-level tagger adapter. Invokes `command tag <reviews.jsonl>
// <spans.jsonl>`; the output holds one span record per line in the
// interchange span format.
class ExternalTagger final : public Tagger {
 public:
  explicit ExternalTagger(std::string command, std::string name = "external");
  std::vector<EntitySpan> extract(const Review& review) const override;
  std::string id() const override { return name_; }

 private:
  std::string command_;
  std::string name_;
};

}  // namespace adrpipe
