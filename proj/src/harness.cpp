#include "adrpipe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "adrpipe/delimited.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 2) throw config_error("k must be >= 2");
  if (corpus.reviews.size() < static_cast<std::size_t>(k))
    throw config_error("corpus " + corpus.name + " has fewer reviews than folds");

  std::vector<std::string> ids;
  ids.reserve(corpus.reviews.size());
  for (const auto& [id, review] : corpus.reviews) ids.push_back(id);
  // Fisher-Yates with a fixed generator; std::shuffle is not portable
  // across standard libraries.
  std::mt19937_64 gen(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % (i + 1));
    std::swap(ids[i], ids[j]);
  }

  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i)
    folds.assignment.emplace(ids[i], static_cast<int>(i % static_cast<std::size_t>(k)));
  return folds;
}

namespace {

std::string span_key(const std::string& review_id,
                     const std::vector<std::pair<std::size_t, std::size_t>>& fragments) {
  std::string key = review_id;
  for (const auto& [begin, end] : fragments) {
    key += ':';
    key += std::to_string(begin);
    key += '-';
    key += std::to_string(end);
  }
  return key;
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t support) {
  ClassMetrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  m.support = static_cast<double>(support);
  return m;
}

}  // namespace

MetricsRecord compute_metrics(const std::vector<LabeledEntity>& gold,
                              const std::vector<Prediction>& predictions) {
  std::unordered_map<std::string, std::deque<std::size_t>> gold_by_key;
  for (std::size_t i = 0; i < gold.size(); ++i)
    gold_by_key[span_key(gold[i].span.review_id, gold[i].span.fragments)].push_back(i);

  std::vector<std::pair<Label, Label>> pairs;  // (gold, predicted)
  pairs.reserve(predictions.size());
  std::vector<std::string> unmatched_predictions;
  for (const Prediction& p : predictions) {
    const std::string key = span_key(p.span.review_id, p.span.fragments);
    auto it = gold_by_key.find(key);
    if (it == gold_by_key.end() || it->second.empty()) {
      unmatched_predictions.push_back(key);
      continue;
    }
    pairs.emplace_back(gold[it->second.front()].label, p.label);
    it->second.pop_front();
  }
  std::vector<std::string> unmatched_gold;
  for (const auto& [key, queue] : gold_by_key) {
    for (std::size_t i = 0; i < queue.size(); ++i) unmatched_gold.push_back(key);
  }
  if (!unmatched_predictions.empty() || !unmatched_gold.empty()) {
    std::sort(unmatched_gold.begin(), unmatched_gold.end());
    std::ostringstream msg;
    msg << "gold/prediction alignment failed:";
    std::size_t listed = 0;
    for (const std::string& key : unmatched_predictions) {
      if (listed++ >= 10) break;
      msg << " extra-prediction " << key;
    }
    for (const std::string& key : unmatched_gold) {
      if (listed++ >= 20) break;
      msg << " missing-prediction " << key;
    }
    throw alignment_error(msg.str());
  }

  std::size_t adr_tp = 0, adr_fp = 0, adr_fn = 0, adr_support = 0;
  std::size_t non_tp = 0, non_fp = 0, non_fn = 0, non_support = 0;
  for (const auto& [g, p] : pairs) {
    if (g == Label::ADR) ++adr_support;
    if (g == Label::NonADR) ++non_support;
    if (p == Label::ADR && g == Label::ADR) ++adr_tp;
    if (p == Label::ADR && g != Label::ADR) ++adr_fp;
    if (p != Label::ADR && g == Label::ADR) ++adr_fn;
    if (p == Label::NonADR && g == Label::NonADR) ++non_tp;
    if (p == Label::NonADR && g != Label::NonADR) ++non_fp;
    if (p != Label::NonADR && g == Label::NonADR) ++non_fn;
  }

  MetricsRecord record;
  record.adr = class_metrics(adr_tp, adr_fp, adr_fn, adr_support);
  record.non_adr = class_metrics(non_tp, non_fp, non_fn, non_support);
  record.macro_precision = (record.adr.precision + record.non_adr.precision) / 2.0;
  record.macro_recall = (record.adr.recall + record.non_adr.recall) / 2.0;
  record.macro_f1 = (record.adr.f1 + record.non_adr.f1) / 2.0;
  return record;
}

ModelFactory baseline_factory(TrainConfig config, std::string trained_on) {
  return [config, trained_on](const std::vector<TrainingExample>& examples) {
    return std::shared_ptr<const Classifier>(train_baseline(config, examples, trained_on));
  };
}

namespace {

struct PreparedEntity {
  const LabeledEntity* entity = nullptr;
  EntityInContext input;
};

std::vector<PreparedEntity> prepare_entities(const Corpus& corpus,
                                             const std::vector<LabeledEntity>& entities,
                                             std::optional<int> window) {
  std::vector<PreparedEntity> out;
  out.reserve(entities.size());
  for (const LabeledEntity& entity : entities) {
    const Review& review = corpus.reviews.at(entity.span.review_id);
    out.push_back(PreparedEntity{&entity, make_context(review, entity.span, window)});
  }
  return out;
}

bool has_both_classes(const std::vector<TrainingExample>& examples) {
  bool adr = false;
  bool non = false;
  for (const auto& [input, label] : examples) {
    (label == Label::ADR ? adr : non) = true;
    if (adr && non) return true;
  }
  return false;
}

MetricsRecord average_metrics(const std::vector<FoldResult>& per_fold) {
  MetricsRecord avg;
  std::size_t used = 0;
  for (const FoldResult& fold : per_fold) {
    if (fold.skipped) continue;
    ++used;
    avg.adr.precision += fold.metrics.adr.precision;
    avg.adr.recall += fold.metrics.adr.recall;
    avg.adr.f1 += fold.metrics.adr.f1;
    avg.adr.support += fold.metrics.adr.support;
    avg.non_adr.precision += fold.metrics.non_adr.precision;
    avg.non_adr.recall += fold.metrics.non_adr.recall;
    avg.non_adr.f1 += fold.metrics.non_adr.f1;
    avg.non_adr.support += fold.metrics.non_adr.support;
    avg.macro_precision += fold.metrics.macro_precision;
    avg.macro_recall += fold.metrics.macro_recall;
    avg.macro_f1 += fold.metrics.macro_f1;
  }
  if (used == 0) throw config_error("every fold was skipped; nothing to average");
  const double n = static_cast<double>(used);
  avg.adr.precision /= n;
  avg.adr.recall /= n;
  avg.adr.f1 /= n;
  avg.adr.support /= n;
  avg.non_adr.precision /= n;
  avg.non_adr.recall /= n;
  avg.non_adr.f1 /= n;
  avg.non_adr.support /= n;
  avg.macro_precision /= n;
  avg.macro_recall /= n;
  avg.macro_f1 /= n;
  return avg;
}

// Identity digest of a training set, used to reuse one trained model across
// folds whose training sets coincide.
std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t training_digest(const std::vector<const LabeledEntity*>& entities) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const LabeledEntity* entity : entities) {
    h = fnv1a(span_key(entity->span.review_id, entity->span.fragments), h);
    h = fnv1a(std::string(to_string(entity->label)), h);
    h = fnv1a(std::string(to_string(entity->provenance)), h);
  }
  return h;
}

}  // namespace

EvalReport run_in_dataset(const Corpus& corpus, const ModelFactory& factory, int k,
                          std::uint64_t seed, std::optional<int> window) {
  const FoldAssignment folds = make_folds(corpus, k, seed);
  const std::vector<PreparedEntity> prepared = prepare_entities(corpus, corpus.entities, window);

  EvalReport report;
  report.k = k;
  report.seed = seed;
  report.train_gold_total = corpus.entities.size();
  report.train_pseudo_total = 0;

  for (int f = 0; f < k; ++f) {
    FoldResult result;
    result.fold = f;

    std::vector<TrainingExample> train;
    std::vector<EntityInContext> test_inputs;
    std::vector<EntitySpan> test_spans;
    std::vector<LabeledEntity> test_gold;
    std::unordered_set<std::string> train_ids, test_ids;
    for (const PreparedEntity& pe : prepared) {
      const int fold = folds.assignment.at(pe.entity->span.review_id);
      if (fold == f) {
        test_inputs.push_back(pe.input);
        test_spans.push_back(pe.entity->span);
        test_gold.push_back(*pe.entity);
        test_ids.insert(pe.entity->span.review_id);
      } else {
        train.emplace_back(pe.input, pe.entity->label);
        train_ids.insert(pe.entity->span.review_id);
      }
    }
    result.train_gold = train.size();
    result.train_review_ids.assign(train_ids.begin(), train_ids.end());
    result.test_review_ids.assign(test_ids.begin(), test_ids.end());
    std::sort(result.train_review_ids.begin(), result.train_review_ids.end());
    std::sort(result.test_review_ids.begin(), result.test_review_ids.end());

    if (!has_both_classes(train)) {
      result.skipped = true;
      result.skip_reason = "training split contains a single class";
      report.per_fold.push_back(std::move(result));
      continue;
    }

    const std::shared_ptr<const Classifier> model = factory(train);
    const std::vector<Prediction> predictions = predict(*model, test_inputs, test_spans);
    result.metrics = compute_metrics(test_gold, predictions);
    report.per_fold.push_back(std::move(result));
  }

  report.averaged = average_metrics(report.per_fold);
  return report;
}

EvalReport run_out_of_dataset(const Corpus& source, const Corpus& target,
                              const Augmentation* augmentation, const ModelFactory& factory,
                              int k, std::uint64_t seed, std::optional<int> window) {
  for (const auto& [id, review] : source.reviews) {
    if (target.reviews.count(id))
      throw config_error("source and target corpora share review id '" + id + "'");
  }
  if (augmentation) {
    const auto ref = ModelRef::parse(augmentation->set.source_model_id);
    if (ref && ref->trained_on == target.name)
      throw provenance_error("augmentation was produced by a model trained on the target corpus '" +
                             target.name + "'");
  }

  const FoldAssignment folds = make_folds(target, k, seed);
  const std::vector<PreparedEntity> source_prepared =
      prepare_entities(source, source.entities, window);
  const std::vector<PreparedEntity> target_prepared =
      prepare_entities(target, target.entities, window);

  // Pseudo entities that survive the confidence floor, with their contexts.
  std::vector<PreparedEntity> pseudo_prepared;
  std::vector<LabeledEntity> floored;
  if (augmentation) {
    floored = augment({}, augmentation->set, augmentation->confidence_floor);
    pseudo_prepared.reserve(floored.size());
    for (const LabeledEntity& entity : floored) {
      auto it = augmentation->reviews.find(entity.span.review_id);
      if (it == augmentation->reviews.end())
        throw integrity_error("augmentation entity references review '" + entity.span.review_id +
                              "' absent from the augmentation reviews");
      pseudo_prepared.push_back(
          PreparedEntity{&entity, make_context(it->second, entity.span, window)});
    }
  }

  EvalReport report;
  report.k = k;
  report.seed = seed;
  report.train_gold_total = source.entities.size();
  report.train_pseudo_total = pseudo_prepared.size();

  std::unordered_map<std::uint64_t, std::shared_ptr<const Classifier>> model_cache;

  for (int f = 0; f < k; ++f) {
    FoldResult result;
    result.fold = f;

    std::vector<EntityInContext> test_inputs;
    std::vector<EntitySpan> test_spans;
    std::vector<LabeledEntity> test_gold;
    std::unordered_set<std::string> test_ids;
    std::unordered_set<std::string> test_texts;
    for (const PreparedEntity& pe : target_prepared) {
      if (folds.assignment.at(pe.entity->span.review_id) != f) continue;
      test_inputs.push_back(pe.input);
      test_spans.push_back(pe.entity->span);
      test_gold.push_back(*pe.entity);
      test_ids.insert(pe.entity->span.review_id);
    }
    for (const auto& [id, review] : target.reviews) {
      if (folds.assignment.at(id) == f) test_texts.insert(review.text);
    }

    std::vector<TrainingExample> train;
    std::vector<const LabeledEntity*> train_identity;
    std::unordered_set<std::string> train_ids;
    for (const PreparedEntity& pe : source_prepared) {
      train.emplace_back(pe.input, pe.entity->label);
      train_identity.push_back(pe.entity);
      train_ids.insert(pe.entity->span.review_id);
    }
    std::size_t pseudo_used = 0;
    for (const PreparedEntity& pe : pseudo_prepared) {
      const Review& review = augmentation->reviews.at(pe.entity->span.review_id);
      if (test_texts.count(review.text)) continue;  // textual duplicate of a test review
      train.emplace_back(pe.input, pe.entity->label);
      train_identity.push_back(pe.entity);
      train_ids.insert(pe.entity->span.review_id);
      ++pseudo_used;
    }
    result.train_gold = source.entities.size();
    result.train_pseudo = pseudo_used;
    result.train_review_ids.assign(train_ids.begin(), train_ids.end());
    result.test_review_ids.assign(test_ids.begin(), test_ids.end());
    std::sort(result.train_review_ids.begin(), result.train_review_ids.end());
    std::sort(result.test_review_ids.begin(), result.test_review_ids.end());

    if (!has_both_classes(train)) {
      result.skipped = true;
      result.skip_reason = "training split contains a single class";
      report.per_fold.push_back(std::move(result));
      continue;
    }

    const std::uint64_t digest = training_digest(train_identity);
    auto cached = model_cache.find(digest);
    std::shared_ptr<const Classifier> model;
    if (cached != model_cache.end()) {
      model = cached->second;
    } else {
      model = factory(train);
      model_cache.emplace(digest, model);
    }

    const std::vector<Prediction> predictions = predict(*model, test_inputs, test_spans);
    result.metrics = compute_metrics(test_gold, predictions);
    report.per_fold.push_back(std::move(result));
  }

  report.averaged = average_metrics(report.per_fold);
  return report;
}

// --- reports -------------------------------------------------------------------

namespace {

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

json metrics_to_json(const MetricsRecord& m) {
  return json{{"ADR",
               {{"precision", round3(m.adr.precision)},
                {"recall", round3(m.adr.recall)},
                {"f1", round3(m.adr.f1)},
                {"support", round3(m.adr.support)}}},
              {"NonADR",
               {{"precision", round3(m.non_adr.precision)},
                {"recall", round3(m.non_adr.recall)},
                {"f1", round3(m.non_adr.f1)},
                {"support", round3(m.non_adr.support)}}},
              {"macro",
               {{"precision", round3(m.macro_precision)},
                {"recall", round3(m.macro_recall)},
                {"f1", round3(m.macro_f1)}}}};
}

std::string fixed3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

}  // namespace

void write_report_json(const EvalReport& report, const fs::path& file) {
  json folds = json::array();
  for (const FoldResult& fold : report.per_fold) {
    json fj{{"fold", fold.fold},
            {"skipped", fold.skipped},
            {"train_gold", fold.train_gold},
            {"train_pseudo", fold.train_pseudo}};
    if (fold.skipped)
      fj["skip_reason"] = fold.skip_reason;
    else
      fj["metrics"] = metrics_to_json(fold.metrics);
    folds.push_back(std::move(fj));
  }
  const json j{{"config_digest", report.config_digest},
               {"k", report.k},
               {"seed", report.seed},
               {"provenance_breakdown",
                {{"gold", report.train_gold_total}, {"pseudo", report.train_pseudo_total}}},
               {"per_fold", folds},
               {"averaged", metrics_to_json(report.averaged)}};
  write_text_file(file, j.dump(2) + "\n");
}

void write_report_tsv(const EvalReport& report, const std::string& train_set,
                      const std::string& model, const fs::path& file) {
  std::ostringstream out;
  out << "train_set\tmodel\tclass\tprecision\trecall\tf1\n";
  const auto row = [&](const std::string& cls, double p, double r, double f) {
    out << train_set << '\t' << model << '\t' << cls << '\t' << fixed3(p) << '\t' << fixed3(r)
        << '\t' << fixed3(f) << '\n';
  };
  row("ADR", report.averaged.adr.precision, report.averaged.adr.recall, report.averaged.adr.f1);
  row("NonADR", report.averaged.non_adr.precision, report.averaged.non_adr.recall,
      report.averaged.non_adr.f1);
  row("macro", report.averaged.macro_precision, report.averaged.macro_recall,
      report.averaged.macro_f1);
  write_text_file(file, out.str());
}

}  // namespace adrpipe
