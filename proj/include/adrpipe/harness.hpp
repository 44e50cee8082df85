#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adrpipe/classifier.hpp"
#include "adrpipe/corpus.hpp"
#include "adrpipe/pseudo.hpp"

namespace adrpipe {

// Review-level fold partition: all entities of a review share its fold.
struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // review id -> fold in [0, k)
};

// Seeded shuffle of the sorted review ids, then round-robin. Fold sizes
// differ by at most one. Deterministic across platforms (the shuffle is
// hand-rolled, not std::shuffle).
FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double support = 0.0;
  bool operator==(const ClassMetrics&) const = default;
};

// Per-class scores plus their arithmetic means. Macro-F is the mean of the
// two per-class F values, not the F of the macro P/R.
struct MetricsRecord {
  ClassMetrics adr;
  ClassMetrics non_adr;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  bool operator==(const MetricsRecord&) const = default;
};

// Classification metrics for predictions aligned one-to-one with gold
// entities by (review_id, fragments). Unmatched items on either side raise
// alignment_error naming the offenders.
MetricsRecord compute_metrics(const std::vector<LabeledEntity>& gold,
                              const std::vector<Prediction>& predictions);

struct FoldResult {
  int fold = 0;
  bool skipped = false;
  std::string skip_reason;
  MetricsRecord metrics;
  std::size_t train_gold = 0;
  std::size_t train_pseudo = 0;
  // Execution trace for leakage assertions; not serialized into reports.
  std::vector<std::string> train_review_ids;
  std::vector<std::string> test_review_ids;
};

struct EvalReport {
  std::vector<FoldResult> per_fold;
  MetricsRecord averaged;  // arithmetic mean over non-skipped folds
  std::string config_digest;
  std::size_t train_gold_total = 0;
  std::size_t train_pseudo_total = 0;
  int k = 0;
  std::uint64_t seed = 0;
};

using ModelFactory =
    std::function<std::shared_ptr<const Classifier>(const std::vector<TrainingExample>&)>;

ModelFactory baseline_factory(TrainConfig config, std::string trained_on);

// Train on the entities of reviews outside each fold, evaluate inside it.
EvalReport run_in_dataset(const Corpus& corpus, const ModelFactory& factory, int k,
                          std::uint64_t seed, std::optional<int> window = std::nullopt);

// Pseudo-labeled augmentation handed to the out-of-dataset protocol. The
// referenced raw reviews ride along because contexts and the per-fold
// textual-duplicate guard both need their texts.
struct Augmentation {
  PseudoSet set;
  std::map<std::string, Review> reviews;
  double confidence_floor = 0.0;
};

// Fold the target; per fold, train on all source gold entities plus the
// augmentation (minus pseudo entities whose review text equals a test
// review's text) and evaluate on the fold. Source and target must be
// review-id disjoint; an augmentation built from a target-trained model is
// rejected with provenance_error.
EvalReport run_out_of_dataset(const Corpus& source, const Corpus& target,
                              const Augmentation* augmentation, const ModelFactory& factory,
                              int k, std::uint64_t seed,
                              std::optional<int> window = std::nullopt);

// Structured report with all folds, metric values rounded to 3 decimals.
void write_report_json(const EvalReport& report, const std::filesystem::path& file);

// Delimited summary mirroring the result-table layout:
// train_set  model  class  precision  recall  f1
void write_report_tsv(const EvalReport& report, const std::string& train_set,
                      const std::string& model, const std::filesystem::path& file);

}  // namespace adrpipe
