#include "adrpipe/ner.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "adrpipe/delimited.hpp"
#include "adrpipe/text.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

Gazetteer build_gazetteer(const Corpus& corpus) {
  if (corpus.entities.empty())
    throw config_error("cannot build a gazetteer from a corpus with no entities");
  Gazetteer gaz;
  for (const LabeledEntity& entity : corpus.entities) {
    const std::string phrase = normalize_phrase(entity.span.surface);
    const std::vector<std::string> tokens = tokenize_lower(phrase);
    if (tokens.empty()) continue;  // punctuation-only surface, unmatchable
    gaz.phrases_.insert(phrase);
    std::string join;
    for (const auto& tok : tokens) {
      if (!join.empty()) join.push_back(' ');
      join += tok;
    }
    gaz.token_joins_.insert(join);
    gaz.max_phrase_tokens_ = std::max(gaz.max_phrase_tokens_, tokens.size());
  }
  if (gaz.phrases_.empty())
    throw config_error("corpus has entities but none with a tokenizable surface");
  return gaz;
}

std::vector<EntitySpan> Gazetteer::extract(const Review& review) const {
  const std::u32string text = decode_utf8(review.text);
  const std::vector<Token> tokens = tokenize(text);
  std::vector<std::string> lower;
  lower.reserve(tokens.size());
  for (const Token& tok : tokens) {
    std::u32string t = tok.text;
    for (char32_t& cp : t) cp = lower_cp(cp);
    lower.push_back(encode_utf8(t));
  }

  std::vector<EntitySpan> spans;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    const std::size_t limit = std::min(max_phrase_tokens_, tokens.size() - i);
    for (std::size_t len = limit; len >= 1; --len) {
      std::string join = lower[i];
      for (std::size_t k = 1; k < len; ++k) {
        join.push_back(' ');
        join += lower[i + k];
      }
      if (!token_joins_.count(join)) continue;
      const std::size_t begin = tokens[i].begin;
      const std::size_t end = tokens[i + len - 1].end;
      const std::string surface = encode_utf8(slice(text, begin, end));
      if (!phrases_.count(normalize_phrase(surface))) continue;
      EntitySpan span;
      span.review_id = review.id;
      span.fragments = {{begin, end}};
      span.surface = surface;
      spans.push_back(std::move(span));
      matched = len;
      break;
    }
    i += matched ? matched : 1;
  }
  return spans;
}

std::vector<EntitySpan> extract_entities(const Tagger& tagger, const Review& review) {
  std::vector<EntitySpan> spans = tagger.extract(review);
  const std::u32string text = decode_utf8(review.text);
  std::size_t prev_end = 0;
  bool first = true;
  for (const EntitySpan& span : spans) {
    if (span.review_id != review.id)
      throw integrity_error("tagger " + tagger.id() + " returned a span for review '" +
                            span.review_id + "' while tagging '" + review.id + "'");
    if (span.fragments.empty())
      throw integrity_error("tagger " + tagger.id() + " returned a span with no fragments");
    std::size_t frag_prev = 0;
    bool frag_first = true;
    for (const auto& [begin, end] : span.fragments) {
      if (begin >= end || end > text.size())
        throw integrity_error("tagger " + tagger.id() + " returned an out-of-bounds span in review " +
                              review.id);
      if (!frag_first && begin < frag_prev)
        throw integrity_error("tagger " + tagger.id() + " returned unsorted fragments in review " +
                              review.id);
      frag_prev = end;
      frag_first = false;
    }
    if (!first && span.fragments.front().first < prev_end)
      throw integrity_error("tagger " + tagger.id() + " returned overlapping or unsorted spans in review " +
                            review.id);
    std::u32string joined;
    for (std::size_t f = 0; f < span.fragments.size(); ++f) {
      if (f) joined.push_back(U' ');
      joined += slice(text, span.fragments[f].first, span.fragments[f].second);
    }
    if (span.surface != encode_utf8(joined))
      throw integrity_error("tagger " + tagger.id() + " returned a surface that does not match the text in review " +
                            review.id);
    prev_end = span.fragments.back().second;
    first = false;
  }
  return spans;
}

// --- external adapter --------------------------------------------------------

namespace {

fs::path make_scratch_dir() {
  static std::mt19937_64 gen{std::random_device{}()};
  const fs::path base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 64; ++attempt) {
    fs::path dir = base / ("adrpipe-" + std::to_string(gen()));
    std::error_code ec;
    if (fs::create_directory(dir, ec)) return dir;
  }
  throw error("cannot create scratch directory under " + base.string());
}

std::string quoted_path(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

ExternalTagger::ExternalTagger(std::string command, std::string name)
    : command_(std::move(command)), name_(std::move(name)) {}

std::vector<EntitySpan> ExternalTagger::extract(const Review& review) const {
  const fs::path dir = make_scratch_dir();
  const fs::path in_path = dir / "reviews.jsonl";
  const fs::path out_path = dir / "spans.jsonl";

  json j{{"id", review.id}, {"drug", review.drug}, {"text", review.text}};
  if (review.rating) j["rating"] = *review.rating;
  write_text_file(in_path, j.dump() + "\n");

  const std::string cmd =
      command_ + " tag " + quoted_path(in_path) + " " + quoted_path(out_path);
  const int status = std::system(cmd.c_str());
  if (status != 0) {
    fs::remove_all(dir);
    throw error("external tagger command failed (" + std::to_string(status) + "): " + cmd);
  }

  std::vector<EntitySpan> spans;
  std::istringstream in(read_text_file(out_path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json sj = json::parse(line);
    EntitySpan span;
    span.review_id = sj.at("review_id").get<std::string>();
    for (const auto& pair : sj.at("fragments"))
      span.fragments.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
    span.surface = sj.at("surface").get<std::string>();
    spans.push_back(std::move(span));
  }
  fs::remove_all(dir);
  return spans;
}

}  // namespace adrpipe
