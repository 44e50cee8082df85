#include "adrpipe/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "adrpipe/delimited.hpp"
#include "adrpipe/text.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Label label) { return label == Label::ADR ? "ADR" : "NonADR"; }

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::Gold ? "Gold" : "Pseudo";
}

Label label_from_string(std::string_view s) {
  if (s == "ADR") return Label::ADR;
  if (s == "NonADR") return Label::NonADR;
  throw value_error("unknown label: " + std::string(s));
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "Gold") return Provenance::Gold;
  if (s == "Pseudo") return Provenance::Pseudo;
  throw value_error("unknown provenance: " + std::string(s));
}

bool entity_order(const LabeledEntity& a, const LabeledEntity& b) {
  return std::tie(a.span.review_id, a.span.fragments, a.label, a.provenance, a.original_type,
                  a.confidence, a.span.surface) <
         std::tie(b.span.review_id, b.span.fragments, b.label, b.provenance, b.original_type,
                  b.confidence, b.span.surface);
}

void canonicalize(Corpus& corpus) {
  std::stable_sort(corpus.entities.begin(), corpus.entities.end(), entity_order);
  corpus.drugs.clear();
  for (const auto& [id, review] : corpus.reviews) corpus.drugs.insert(review.drug);
}

std::string surface_from_fragments(
    const Review& review, const std::vector<std::pair<std::size_t, std::size_t>>& fragments) {
  const std::u32string text = decode_utf8(review.text);
  std::u32string joined;
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    if (i) joined.push_back(U' ');
    joined += slice(text, fragments[i].first, fragments[i].second);
  }
  return encode_utf8(joined);
}

void validate(const Corpus& corpus) {
  for (const auto& [id, review] : corpus.reviews) {
    if (id.empty() || review.id.empty()) throw integrity_error("empty review id in corpus " + corpus.name);
    if (id != review.id)
      throw integrity_error("review map key '" + id + "' does not match review id '" + review.id + "'");
    if (review.rating && (*review.rating < 1 || *review.rating > 5))
      throw integrity_error("review " + id + " has rating outside [1,5]");
  }
  for (const LabeledEntity& entity : corpus.entities) {
    auto it = corpus.reviews.find(entity.span.review_id);
    if (it == corpus.reviews.end())
      throw integrity_error("entity references unknown review " + entity.span.review_id);
    const Review& review = it->second;
    const std::size_t text_len = decode_utf8(review.text).size();
    if (entity.span.fragments.empty())
      throw integrity_error("entity in review " + review.id + " has no fragments");
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& [begin, end] : entity.span.fragments) {
      if (begin >= end)
        throw integrity_error("entity in review " + review.id + " has an empty fragment");
      if (!first && begin < prev_end)
        throw integrity_error("entity in review " + review.id + " has unsorted or overlapping fragments");
      if (end > text_len)
        throw integrity_error("entity fragment out of bounds in review " + review.id);
      prev_end = end;
      first = false;
    }
    const std::string expected = surface_from_fragments(review, entity.span.fragments);
    if (entity.span.surface != expected)
      throw integrity_error("surface mismatch in review " + review.id + ": stored '" +
                            entity.span.surface + "' vs text '" + expected + "'");
    if (entity.provenance == Provenance::Gold && entity.confidence)
      throw integrity_error("gold entity in review " + review.id + " carries a confidence");
    if (entity.provenance == Provenance::Pseudo && !entity.confidence)
      throw integrity_error("pseudo entity in review " + review.id + " lacks a confidence");
    if (entity.confidence && (*entity.confidence < 0.0 || *entity.confidence > 1.0))
      throw integrity_error("entity confidence outside [0,1] in review " + review.id);
  }
  std::set<std::string> drugs;
  for (const auto& [id, review] : corpus.reviews) drugs.insert(review.drug);
  if (drugs != corpus.drugs)
    throw integrity_error("corpus " + corpus.name + " drug set does not match its reviews");
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.review_count = corpus.reviews.size();
  stats.entity_count = corpus.entities.size();
  stats.drug_count = corpus.drugs.size();
  for (const LabeledEntity& entity : corpus.entities) {
    if (entity.label == Label::ADR)
      ++stats.adr_count;
    else
      ++stats.non_adr_count;
    if (entity.original_type) ++stats.by_original_type[*entity.original_type];
  }
  return stats;
}

// --- CADEC ------------------------------------------------------------------

namespace {

std::optional<Label> harmonize_cadec_type(const std::string& type, const std::string& where) {
  if (type == "ADR") return Label::ADR;
  if (type == "Disease" || type == "Symptom" || type == "Finding") return Label::NonADR;
  if (type == "Drug") return std::nullopt;  // not a disease-related entity
  throw parse_error(where + ": unknown CADEC entity type '" + type + "'");
}

std::size_t parse_offset(const std::string& token, const std::string& where) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw parse_error(where + ": malformed offset '" + token + "'");
  return value;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void parse_ann_file(const fs::path& ann_path, const Review& review,
                    std::vector<LabeledEntity>* entities) {
  const std::string content = read_text_file(ann_path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = ann_path.filename().string() + ":" + std::to_string(line_no);
    if (line[0] != 'T') continue;  // notes, relations, attribute lines
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() < 2) throw parse_error(where + ": expected tab-separated annotation columns");
    const std::string& mid = cols[1];

    // "<Type> s0 e0[;s1 e1]*" possibly with spaces around the semicolons.
    const std::size_t first_space = mid.find(' ');
    if (first_space == std::string::npos)
      throw parse_error(where + ": annotation has no offsets");
    const std::string type = mid.substr(0, first_space);
    const std::string offsets_part = mid.substr(first_space + 1);

    std::vector<std::pair<std::size_t, std::size_t>> fragments;
    std::size_t pos = 0;
    while (pos <= offsets_part.size()) {
      std::size_t semi = offsets_part.find(';', pos);
      const std::string range = offsets_part.substr(
          pos, semi == std::string::npos ? std::string::npos : semi - pos);
      const std::vector<std::string> pair_tokens = split_ws(range);
      if (pair_tokens.size() != 2)
        throw parse_error(where + ": malformed offset range '" + range + "'");
      const std::size_t begin = parse_offset(pair_tokens[0], where);
      const std::size_t end = parse_offset(pair_tokens[1], where);
      if (begin >= end) throw parse_error(where + ": empty offset range '" + range + "'");
      fragments.emplace_back(begin, end);
      if (semi == std::string::npos) break;
      pos = semi + 1;
    }
    std::sort(fragments.begin(), fragments.end());
    for (std::size_t i = 1; i < fragments.size(); ++i) {
      if (fragments[i].first < fragments[i - 1].second)
        throw integrity_error(where + ": overlapping fragments within one annotation");
    }

    const std::optional<Label> label = harmonize_cadec_type(type, where);
    if (!label) continue;  // "Drug" annotations are dropped

    const std::size_t text_len = decode_utf8(review.text).size();
    for (const auto& [begin, end] : fragments) {
      if (end > text_len)
        throw integrity_error(where + ": fragment [" + std::to_string(begin) + "," +
                              std::to_string(end) + ") outside text of length " +
                              std::to_string(text_len));
    }

    LabeledEntity entity;
    entity.span.review_id = review.id;
    entity.span.fragments = std::move(fragments);
    entity.span.surface = surface_from_fragments(review, entity.span.fragments);
    entity.label = *label;
    entity.provenance = Provenance::Gold;
    entity.original_type = type;

    // The .ann surface column is a cross-check only; the release has
    // newline-vs-space divergences, so compare whitespace-normalized.
    if (cols.size() >= 3) {
      const std::string file_surface = normalize_ws(cols[2]);
      if (!file_surface.empty() && file_surface != normalize_ws(entity.span.surface))
        throw integrity_error(where + ": surface mismatch: annotation says '" + cols[2] +
                              "' but text offsets give '" + entity.span.surface + "'");
    }
    entities->push_back(std::move(entity));
  }
}

}  // namespace

Corpus load_cadec(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw parse_error("not a directory: " + directory.string());

  fs::path text_dir = directory;
  fs::path ann_dir = directory;
  if (fs::is_directory(directory / "text") && fs::is_directory(directory / "original")) {
    text_dir = directory / "text";
    ann_dir = directory / "original";
  }

  std::vector<fs::path> text_files;
  for (const auto& entry : fs::directory_iterator(text_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      text_files.push_back(entry.path());
  }
  std::sort(text_files.begin(), text_files.end());

  Corpus corpus;
  corpus.name = directory.filename().string();
  if (corpus.name.empty()) corpus.name = directory.parent_path().filename().string();

  for (const fs::path& text_path : text_files) {
    const std::string stem = text_path.stem().string();
    Review review;
    review.id = stem;
    review.drug = normalize_drug(stem.substr(0, stem.find('.')));
    review.text = read_text_file(text_path);
    if (corpus.reviews.count(review.id))
      throw value_error("duplicate review id: " + review.id);

    const fs::path ann_path = ann_dir / (stem + ".ann");
    if (fs::exists(ann_path)) parse_ann_file(ann_path, review, &corpus.entities);
    corpus.reviews.emplace(review.id, std::move(review));
  }

  canonicalize(corpus);
  validate(corpus);
  return corpus;
}

// --- PsyTAR -----------------------------------------------------------------

namespace {

void check_header(const std::vector<std::string>& header,
                  const std::vector<std::string>& expected, const std::string& what) {
  if (header != expected) {
    std::string want;
    for (const auto& col : expected) {
      if (!want.empty()) want += ",";
      want += col;
    }
    std::string got;
    for (const auto& col : header) {
      if (!got.empty()) got += ",";
      got += col;
    }
    throw schema_error(what + ": expected header '" + want + "', got '" + got + "'");
  }
}

Label harmonize_psytar_type(const std::string& type, std::size_t row) {
  if (type == "ADR") return Label::ADR;
  if (type == "WD" || type == "DI" || type == "SSI") return Label::NonADR;
  throw value_error("annotations row " + std::to_string(row) + ": unknown PsyTAR entity type '" +
                    type + "'");
}

// Earliest case-insensitive occurrence of `phrase` in `text`, in code points.
std::optional<std::pair<std::size_t, std::size_t>> find_phrase(const std::u32string& text_lower,
                                                               const std::u32string& phrase_lower) {
  if (phrase_lower.empty()) return std::nullopt;
  const std::size_t pos = text_lower.find(phrase_lower);
  if (pos == std::u32string::npos) return std::nullopt;
  return std::make_pair(pos, pos + phrase_lower.size());
}

std::u32string lowered(const std::u32string& s) {
  std::u32string out = s;
  for (char32_t& cp : out) cp = lower_cp(cp);
  return out;
}

std::u32string trimmed(const std::u32string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space_cp(s[b])) ++b;
  while (e > b && is_space_cp(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace

fs::path default_psytar_posts(const fs::path& annotations) {
  fs::path posts = annotations;
  posts.replace_filename(annotations.stem().string() + "_posts" + annotations.extension().string());
  return posts;
}

PsytarLoad load_psytar(const fs::path& annotations, const fs::path& posts) {
  const std::string posts_content = read_text_file(posts);
  const char posts_delim = detect_delimiter(posts_content);
  const auto posts_rows = parse_delimited(posts_content, posts_delim);
  if (posts_rows.empty()) throw schema_error("posts file is empty: " + posts.string());
  check_header(posts_rows[0], {"post_id", "drug", "text"}, "posts file");

  PsytarLoad result;
  Corpus& corpus = result.corpus;
  corpus.name = annotations.stem().string();

  for (std::size_t r = 1; r < posts_rows.size(); ++r) {
    const auto& row = posts_rows[r];
    if (row.size() != 3)
      throw parse_error("posts row " + std::to_string(r) + ": expected 3 fields, got " +
                        std::to_string(row.size()));
    Review review;
    review.id = row[0];
    review.drug = normalize_drug(row[1]);
    review.text = row[2];
    if (review.id.empty()) throw value_error("posts row " + std::to_string(r) + ": empty post id");
    if (!corpus.reviews.emplace(review.id, review).second)
      throw value_error("duplicate post id: " + review.id);
  }

  const std::string ann_content = read_text_file(annotations);
  const char ann_delim = detect_delimiter(ann_content);
  const auto ann_rows = parse_delimited(ann_content, ann_delim);
  if (ann_rows.empty()) throw schema_error("annotations file is empty: " + annotations.string());
  check_header(ann_rows[0], {"post_id", "drug", "entity_type", "phrase"}, "annotations file");

  // Decode each post once; annotation rows re-use the cache.
  std::map<std::string, std::pair<std::u32string, std::u32string>> decoded;  // id -> (text, lower)
  for (const auto& [id, review] : corpus.reviews) {
    const std::u32string text = decode_utf8(review.text);
    decoded.emplace(id, std::make_pair(text, lowered(text)));
  }

  for (std::size_t r = 1; r < ann_rows.size(); ++r) {
    const auto& row = ann_rows[r];
    if (row.size() != 4)
      throw parse_error("annotations row " + std::to_string(r) + ": expected 4 fields, got " +
                        std::to_string(row.size()));
    const std::string& post_id = row[0];
    const std::string& type = row[2];
    const std::string& phrase = row[3];

    const Label label = harmonize_psytar_type(type, r);
    auto review_it = corpus.reviews.find(post_id);
    if (review_it == corpus.reviews.end())
      throw integrity_error("annotations row " + std::to_string(r) + ": unknown post id '" +
                            post_id + "'");

    const auto& [text, text_lower] = decoded.at(post_id);
    const std::u32string needle = lowered(trimmed(decode_utf8(phrase)));
    const auto hit = find_phrase(text_lower, needle);
    if (!hit) {
      result.skipped.push_back(SkippedRow{r, post_id, phrase, "phrase not found in post text"});
      continue;
    }

    LabeledEntity entity;
    entity.span.review_id = post_id;
    entity.span.fragments = {*hit};
    entity.span.surface = encode_utf8(slice(text, hit->first, hit->second));
    entity.label = label;
    entity.provenance = Provenance::Gold;
    entity.original_type = type;
    corpus.entities.push_back(std::move(entity));
  }

  canonicalize(corpus);
  validate(corpus);
  return result;
}

// --- raw reviews ------------------------------------------------------------

std::vector<Review> load_reviews(const fs::path& file) {
  const auto rows = read_delimited_file(file, ',');
  if (rows.empty()) throw schema_error("reviews file is empty: " + file.string());
  check_header(rows[0], {"review_id", "drug", "rating", "text"}, "reviews file");

  std::vector<Review> reviews;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4)
      throw parse_error("reviews row " + std::to_string(r) + ": expected 4 fields, got " +
                        std::to_string(row.size()));
    Review review;
    review.id = row[0];
    review.drug = normalize_drug(row[1]);
    review.text = row[3];
    if (review.id.empty()) throw value_error("reviews row " + std::to_string(r) + ": empty review id");
    if (!seen.insert(review.id).second)
      throw value_error("duplicate review id: " + review.id);
    if (!row[2].empty()) {
      int rating = 0;
      const auto [ptr, ec] =
          std::from_chars(row[2].data(), row[2].data() + row[2].size(), rating);
      if (ec != std::errc() || ptr != row[2].data() + row[2].size())
        throw value_error("reviews row " + std::to_string(r) + ": malformed rating '" + row[2] + "'");
      if (rating < 1 || rating > 5)
        throw value_error("reviews row " + std::to_string(r) + ": rating " + row[2] +
                          " outside [1,5]");
      review.rating = rating;
    }
    reviews.push_back(std::move(review));
  }
  return reviews;
}

void write_reviews(const std::vector<Review>& reviews, const fs::path& file) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"review_id", "drug", "rating", "text"});
  for (const Review& review : reviews) {
    rows.push_back({review.id, review.drug,
                    review.rating ? std::to_string(*review.rating) : std::string(), review.text});
  }
  write_delimited_file(file, rows, ',');
}

// --- interchange ------------------------------------------------------------

namespace {

json span_to_json(const EntitySpan& span) {
  json fragments = json::array();
  for (const auto& [begin, end] : span.fragments) fragments.push_back({begin, end});
  return json{{"review_id", span.review_id}, {"fragments", fragments}, {"surface", span.surface}};
}

EntitySpan span_from_json(const json& j) {
  EntitySpan span;
  span.review_id = j.at("review_id").get<std::string>();
  for (const auto& pair : j.at("fragments"))
    span.fragments.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
  span.surface = j.at("surface").get<std::string>();
  return span;
}

json entity_to_json(const LabeledEntity& entity) {
  json j{{"span", span_to_json(entity.span)},
         {"label", std::string(to_string(entity.label))},
         {"provenance", std::string(to_string(entity.provenance))}};
  if (entity.confidence) j["confidence"] = *entity.confidence;
  if (entity.original_type) j["original_type"] = *entity.original_type;
  return j;
}

LabeledEntity entity_from_json(const json& j) {
  LabeledEntity entity;
  entity.span = span_from_json(j.at("span"));
  entity.label = label_from_string(j.at("label").get<std::string>());
  entity.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  if (j.contains("confidence")) entity.confidence = j.at("confidence").get<double>();
  if (j.contains("original_type")) entity.original_type = j.at("original_type").get<std::string>();
  return entity;
}

}  // namespace

void save_interchange(const Corpus& corpus, const fs::path& file) {
  std::ostringstream out;
  out << json{{"name", corpus.name}}.dump() << '\n';

  std::map<std::string, std::vector<const LabeledEntity*>> by_review;
  for (const LabeledEntity& entity : corpus.entities)
    by_review[entity.span.review_id].push_back(&entity);

  for (const auto& [id, review] : corpus.reviews) {
    json j{{"id", review.id}, {"drug", review.drug}, {"text", review.text}};
    if (review.rating) j["rating"] = *review.rating;
    json entities = json::array();
    auto it = by_review.find(id);
    if (it != by_review.end()) {
      for (const LabeledEntity* entity : it->second) entities.push_back(entity_to_json(*entity));
    }
    j["entities"] = std::move(entities);
    out << j.dump() << '\n';
  }
  write_text_file(file, out.str());
}

Corpus load_interchange(const fs::path& file) {
  const std::string content = read_text_file(file);
  std::istringstream in(content);
  std::string line;
  Corpus corpus;
  bool saw_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw parse_error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!saw_header) {
      corpus.name = j.at("name").get<std::string>();
      saw_header = true;
      continue;
    }
    Review review;
    review.id = j.at("id").get<std::string>();
    review.drug = j.at("drug").get<std::string>();
    review.text = j.at("text").get<std::string>();
    if (j.contains("rating")) review.rating = j.at("rating").get<int>();
    if (!corpus.reviews.emplace(review.id, review).second)
      throw value_error("duplicate review id in interchange file: " + review.id);
    for (const auto& ej : j.at("entities")) corpus.entities.push_back(entity_from_json(ej));
  }
  if (!saw_header) throw parse_error("interchange file has no header record: " + file.string());
  canonicalize(corpus);
  validate(corpus);
  return corpus;
}

}  // namespace adrpipe
