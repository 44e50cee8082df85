#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adrpipe/corpus.hpp"

namespace adrpipe {

// Token standing in for the entity inside its context. Plain tokens can
// never contain '<' or '>', so no collision is possible.
inline constexpr const char* kEntitySentinel = "<entity>";

// The two-input view the classifier consumes: the entity's own tokens and
// the surrounding review tokens with one sentinel per entity fragment.
struct EntityInContext {
  std::vector<std::string> entity_tokens;   // lowercased
  std::vector<std::string> context_tokens;  // lowercased, sentinel-substituted
  std::string review_id;
  bool operator==(const EntityInContext&) const = default;
};

struct TrainConfig {
  int epochs = 15;
  int batch_size = 128;
  int hidden_units = 300;
  double learning_rate = 0.01;
  double l2 = 0.001;
  double dropout = 0.5;
  std::uint64_t seed = 42;
};

// Throws config_error when a field violates the TrainConfig invariants.
void validate(const TrainConfig& config);

struct Prediction {
  std::string review_id;
  EntitySpan span;
  Label label = Label::NonADR;
  double score = 0.0;  // probability of ADR; label is ADR iff score >= 0.5
  bool operator==(const Prediction&) const = default;
};

// window: number of context tokens kept on each side of every sentinel;
// nullopt keeps the whole review.
EntityInContext make_context(const Review& review, const EntitySpan& span,
                             std::optional<int> window = std::nullopt);

// Indicator feature names for one input: entity tokens and bigrams, context
// tokens inside the window, entity x nearest-context interactions, bias.
// Deduplicated, first-occurrence order.
std::vector<std::string> feature_strings(const EntityInContext& input);

using TrainingExample = std::pair<EntityInContext, Label>;

// Indexed view of a training set, exposed so tests can probe the loss
// surface directly.
struct SparseDataset {
  std::vector<std::vector<std::int32_t>> rows;  // feature indices per example
  std::vector<std::int8_t> positive;            // 1 = ADR
  std::size_t feature_count = 0;
  std::size_t bias_index = 0;  // excluded from the L2 penalty
};

// Mean logistic loss plus (l2/2) * ||w||^2 over non-bias coordinates.
double logistic_loss(const std::vector<double>& weights, const SparseDataset& data, double l2);
std::vector<double> logistic_gradient(const std::vector<double>& weights, const SparseDataset& data,
                                      double l2);

// Binary log-linear model over indicator features.
class LogLinearModel {
 public:
  double score(const EntityInContext& input) const;  // P(ADR)
  double weight(const std::string& feature) const;
  void set_weight(const std::string& feature, double value);
  const std::map<std::string, double>& weights() const { return weights_; }

 private:
  std::map<std::string, double> weights_;
};

// Full-batch gradient descent with a backtracking line search, run to
// convergence. The objective is convex, so the result does not depend on
// config.seed; warm_start only changes the starting point, not the optimum.
LogLinearModel train_loglinear(const TrainConfig& config,
                               const std::vector<TrainingExample>& examples,
                               const LogLinearModel* warm_start = nullptr);

struct Capabilities {
  bool deterministic = false;
  bool seedable = false;
};

// Classification contract shared by the baseline and plugin adapters.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<double> scores(const std::vector<EntityInContext>& inputs) const = 0;
  virtual std::string id() const = 0;
  virtual Capabilities capabilities() const = 0;
};

// Identifies a trained model as kind:trained_on:seed, e.g. "baseline:CADEC:42".
struct ModelRef {
  std::string kind;
  std::string trained_on;
  std::uint64_t seed = 0;

  std::string to_string() const;
  static std::optional<ModelRef> parse(std::string_view s);
};

class BaselineClassifier final : public Classifier {
 public:
  BaselineClassifier(LogLinearModel model, std::string trained_on, std::uint64_t seed);

  std::vector<double> scores(const std::vector<EntityInContext>& inputs) const override;
  std::string id() const override;
  Capabilities capabilities() const override { return {true, true}; }
  const LogLinearModel& model() const { return model_; }
  LogLinearModel& model() { return model_; }

 private:
  LogLinearModel model_;
  ModelRef ref_;
};

std::shared_ptr<Classifier> train_baseline(const TrainConfig& config,
                                           const std::vector<TrainingExample>& examples,
                                           const std::string& trained_on,
                                           const LogLinearModel* warm_start = nullptr);

// One prediction per input, order preserving; spans are passed through.
std::vector<Prediction> predict(const Classifier& classifier,
                                const std::vector<EntityInContext>& inputs,
                                const std::vector<EntitySpan>& spans);

// Process-level classifier adapter. Protocol:
//   command train <train.jsonl> <model_path> <config.json>
//   command predict <model_path> <examples.jsonl> <out.jsonl>
//   command capabilities            (prints {"deterministic":..,"seedable":..})
class ExternalClassifier final : public Classifier {
 public:
  ExternalClassifier(std::string command, std::filesystem::path model_path, ModelRef ref,
                     Capabilities caps);

  std::vector<double> scores(const std::vector<EntityInContext>& inputs) const override;
  std::string id() const override { return ref_.to_string(); }
  Capabilities capabilities() const override { return caps_; }

 private:
  std::string command_;
  std::filesystem::path model_path_;
  ModelRef ref_;
  Capabilities caps_;
};

std::shared_ptr<Classifier> train_external(const std::string& command, const TrainConfig& config,
                                           const std::vector<TrainingExample>& examples,
                                           const std::string& trained_on);

}  // namespace adrpipe
