#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adrpipe/errors.hpp"

namespace adrpipe {

struct Review {
  std::string id;
  std::string drug;  // normalized: uppercase, trimmed, whitespace collapsed
  std::optional<int> rating;  // 1..5 when present
  std::string text;  // UTF-8; all offsets below count code points
  bool operator==(const Review&) const = default;
};

enum class Label { ADR, NonADR };
enum class Provenance { Gold, Pseudo };

std::string_view to_string(Label label);
std::string_view to_string(Provenance provenance);
Label label_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);

// A possibly discontinuous span. surface is always the text fragments
// re-sliced from the review and joined with single spaces.
struct EntitySpan {
  std::string review_id;
  std::vector<std::pair<std::size_t, std::size_t>> fragments;  // [begin, end)
  std::string surface;
  bool operator==(const EntitySpan&) const = default;
};

struct LabeledEntity {
  EntitySpan span;
  Label label = Label::NonADR;
  Provenance provenance = Provenance::Gold;
  std::optional<double> confidence;           // present iff provenance == Pseudo
  std::optional<std::string> original_type;   // pre-harmonization tag
  bool operator==(const LabeledEntity&) const = default;
};

// Entities are kept sorted by entity_order so that corpora compare equal
// independently of source-file row order.
bool entity_order(const LabeledEntity& a, const LabeledEntity& b);

struct Corpus {
  std::string name;
  std::map<std::string, Review> reviews;
  std::vector<LabeledEntity> entities;
  std::set<std::string> drugs;
  bool operator==(const Corpus&) const = default;
};

struct CorpusStats {
  std::size_t review_count = 0;
  std::size_t entity_count = 0;
  std::size_t adr_count = 0;
  std::size_t non_adr_count = 0;
  std::size_t drug_count = 0;
  std::map<std::string, std::size_t> by_original_type;
  bool operator==(const CorpusStats&) const = default;
};

// Sorts entities into canonical order and rebuilds the drug set.
void canonicalize(Corpus& corpus);

// Checks every corpus invariant; throws integrity_error on the first failure.
void validate(const Corpus& corpus);

// Joined text fragments of a span, sliced from the review it references.
std::string surface_from_fragments(const Review& review,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& fragments);

// --- loaders ---------------------------------------------------------------

// Directory of <name>.txt / <name>.ann standoff pairs, or the official
// release layout with text/ and original/ subdirectories. The drug name is
// the filename prefix up to the first '.'.
Corpus load_cadec(const std::filesystem::path& directory);

struct SkippedRow {
  std::size_t row = 0;  // 1-based data row in the annotations file
  std::string post_id;
  std::string phrase;
  std::string reason;
};

struct PsytarLoad {
  Corpus corpus;
  std::vector<SkippedRow> skipped;
};

// annotations: delimited rows post_id,drug,entity_type,phrase (tab or comma,
// detected from the header). posts: post_id,drug,text. Phrase offsets are
// recovered by the earliest case-insensitive occurrence in the post text;
// phrases that never occur are excluded and reported in `skipped`.
PsytarLoad load_psytar(const std::filesystem::path& annotations,
                       const std::filesystem::path& posts);

// <stem>_posts<ext> next to the annotations file.
std::filesystem::path default_psytar_posts(const std::filesystem::path& annotations);

// UTF-8 delimited file with header exactly review_id,drug,rating,text.
std::vector<Review> load_reviews(const std::filesystem::path& file);
void write_reviews(const std::vector<Review>& reviews, const std::filesystem::path& file);

CorpusStats corpus_stats(const Corpus& corpus);

// --- canonical interchange format ------------------------------------------
// JSON-lines: a {"name": ...} header record, then one record per review with
// fields id/drug/rating/text plus its entity list. Round-trips exactly.

void save_interchange(const Corpus& corpus, const std::filesystem::path& file);
Corpus load_interchange(const std::filesystem::path& file);

}  // namespace adrpipe
