#include "adrpipe/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "adrpipe/delimited.hpp"
#include "adrpipe/text.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const TrainConfig& config) {
  if (config.epochs <= 0) throw config_error("epochs must be positive");
  if (config.batch_size <= 0) throw config_error("batch_size must be positive");
  if (config.hidden_units <= 0) throw config_error("hidden_units must be positive");
  if (!(config.learning_rate > 0)) throw config_error("learning_rate must be positive");
  if (!(config.l2 > 0)) throw config_error("l2 must be positive");
  if (config.dropout < 0 || config.dropout >= 1) throw config_error("dropout must be in [0,1)");
}

// --- context construction ----------------------------------------------------

EntityInContext make_context(const Review& review, const EntitySpan& span,
                             std::optional<int> window) {
  if (span.review_id != review.id)
    throw integrity_error("span belongs to review '" + span.review_id + "', not '" + review.id + "'");
  if (window && *window < 0) throw config_error("context window must be non-negative");

  const std::u32string text = decode_utf8(review.text);
  if (span.fragments.empty()) throw integrity_error("span has no fragments");
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& [begin, end] : span.fragments) {
    if (begin >= end || end > text.size())
      throw integrity_error("span out of bounds in review " + review.id);
    if (!first && begin < prev_end)
      throw integrity_error("span fragments unsorted or overlapping in review " + review.id);
    prev_end = end;
    first = false;
  }

  EntityInContext out;
  out.review_id = review.id;
  out.entity_tokens = tokenize_lower(span.surface);
  if (out.entity_tokens.empty()) {
    // Punctuation-only surface: fall back to its normalized form so the
    // entity still contributes a feature.
    const std::string fallback = normalize_phrase(span.surface);
    if (fallback.empty())
      throw integrity_error("entity surface is blank in review " + review.id);
    out.entity_tokens.push_back(fallback);
  }

  const std::vector<Token> tokens = tokenize(text);

  // Map each fragment to the run of tokens it overlaps, or to the insertion
  // point between tokens when it covers no token at all.
  struct FragmentRun {
    bool overlaps = false;
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t insert_at = 0;
  };
  std::vector<FragmentRun> runs;
  runs.reserve(span.fragments.size());
  for (const auto& [fbegin, fend] : span.fragments) {
    FragmentRun run;
    std::size_t t = 0;
    while (t < tokens.size() && tokens[t].end <= fbegin) ++t;
    if (t < tokens.size() && tokens[t].begin < fend) {
      run.overlaps = true;
      run.first = t;
      std::size_t u = t;
      while (u + 1 < tokens.size() && tokens[u + 1].begin < fend) ++u;
      run.last = u;
    } else {
      run.insert_at = t;
    }
    runs.push_back(run);
  }

  auto lower_token = [&](const Token& tok) {
    std::u32string t = tok.text;
    for (char32_t& cp : t) cp = lower_cp(cp);
    return encode_utf8(t);
  };

  std::vector<std::string> context;
  std::vector<std::size_t> sentinel_positions;
  std::size_t i = 0;
  std::size_t fi = 0;
  while (i < tokens.size() || fi < runs.size()) {
    if (fi < runs.size() && !runs[fi].overlaps && runs[fi].insert_at == i) {
      sentinel_positions.push_back(context.size());
      context.emplace_back(kEntitySentinel);
      ++fi;
      continue;
    }
    if (fi < runs.size() && runs[fi].overlaps && runs[fi].first == i) {
      std::size_t last = runs[fi].last;
      sentinel_positions.push_back(context.size());
      context.emplace_back(kEntitySentinel);
      ++fi;
      // Later fragments that begin inside the consumed token run collapse
      // into adjacent sentinels.
      while (fi < runs.size() &&
             ((runs[fi].overlaps && runs[fi].first <= last) ||
              (!runs[fi].overlaps && runs[fi].insert_at <= last))) {
        sentinel_positions.push_back(context.size());
        context.emplace_back(kEntitySentinel);
        if (runs[fi].overlaps) last = std::max(last, runs[fi].last);
        ++fi;
      }
      i = last + 1;
      continue;
    }
    if (i < tokens.size()) {
      context.push_back(lower_token(tokens[i]));
      ++i;
    }
  }

  if (window) {
    const std::size_t w = static_cast<std::size_t>(*window);
    std::vector<std::string> kept;
    for (std::size_t j = 0; j < context.size(); ++j) {
      bool keep = false;
      for (std::size_t s : sentinel_positions) {
        const std::size_t dist = j > s ? j - s : s - j;
        if (dist <= w) {
          keep = true;
          break;
        }
      }
      if (keep) kept.push_back(context[j]);
    }
    context = std::move(kept);
  }
  out.context_tokens = std::move(context);
  return out;
}

// --- features ----------------------------------------------------------------

std::vector<std::string> feature_strings(const EntityInContext& input) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  auto add = [&](std::string f) {
    if (seen.insert(f).second) out.push_back(std::move(f));
  };

  add("B");
  for (const std::string& t : input.entity_tokens) add("E=" + t);
  for (std::size_t i = 0; i + 1 < input.entity_tokens.size(); ++i)
    add("EB=" + input.entity_tokens[i] + " " + input.entity_tokens[i + 1]);
  for (const std::string& c : input.context_tokens) {
    if (c != kEntitySentinel) add("C=" + c);
  }
  for (std::size_t p = 0; p < input.context_tokens.size(); ++p) {
    if (input.context_tokens[p] != kEntitySentinel) continue;
    const std::string* left = nullptr;
    for (std::size_t j = p; j-- > 0;) {
      if (input.context_tokens[j] != kEntitySentinel) {
        left = &input.context_tokens[j];
        break;
      }
    }
    const std::string* right = nullptr;
    for (std::size_t j = p + 1; j < input.context_tokens.size(); ++j) {
      if (input.context_tokens[j] != kEntitySentinel) {
        right = &input.context_tokens[j];
        break;
      }
    }
    for (const std::string& t : input.entity_tokens) {
      if (left) add("IL=" + t + "|" + *left);
      if (right) add("IR=" + t + "|" + *right);
    }
  }
  return out;
}

// --- loss / gradient ----------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow
double softplus_neg(double m) {
  if (m > 0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

}  // namespace

double logistic_loss(const std::vector<double>& weights, const SparseDataset& data, double l2) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    double s = 0.0;
    for (std::int32_t f : data.rows[i]) s += weights[static_cast<std::size_t>(f)];
    const double y = data.positive[i] ? 1.0 : -1.0;
    total += softplus_neg(y * s);
  }
  total /= static_cast<double>(data.rows.size());
  double penalty = 0.0;
  for (std::size_t f = 0; f < weights.size(); ++f) {
    if (f == data.bias_index) continue;
    penalty += weights[f] * weights[f];
  }
  return total + 0.5 * l2 * penalty;
}

std::vector<double> logistic_gradient(const std::vector<double>& weights, const SparseDataset& data,
                                      double l2) {
  std::vector<double> grad(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.rows.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    double s = 0.0;
    for (std::int32_t f : data.rows[i]) s += weights[static_cast<std::size_t>(f)];
    const double y = data.positive[i] ? 1.0 : -1.0;
    const double coeff = -y * sigmoid(-y * s) * inv_n;
    for (std::int32_t f : data.rows[i]) grad[static_cast<std::size_t>(f)] += coeff;
  }
  for (std::size_t f = 0; f < weights.size(); ++f) {
    if (f == data.bias_index) continue;
    grad[f] += l2 * weights[f];
  }
  return grad;
}

// --- model -------------------------------------------------------------------

double LogLinearModel::score(const EntityInContext& input) const {
  double s = 0.0;
  for (const std::string& f : feature_strings(input)) {
    auto it = weights_.find(f);
    if (it != weights_.end()) s += it->second;
  }
  return sigmoid(s);
}

double LogLinearModel::weight(const std::string& feature) const {
  auto it = weights_.find(feature);
  return it == weights_.end() ? 0.0 : it->second;
}

void LogLinearModel::set_weight(const std::string& feature, double value) {
  weights_[feature] = value;
}

LogLinearModel train_loglinear(const TrainConfig& config,
                               const std::vector<TrainingExample>& examples,
                               const LogLinearModel* warm_start) {
  validate(config);
  std::size_t positives = 0;
  for (const auto& [input, label] : examples) {
    if (label == Label::ADR) ++positives;
  }
  if (examples.empty() || positives == 0 || positives == examples.size())
    throw config_error("training set must contain at least one example of each class");

  std::unordered_map<std::string, std::int32_t> index;
  std::vector<std::string> names;
  auto intern = [&](const std::string& f) {
    auto [it, inserted] = index.emplace(f, static_cast<std::int32_t>(names.size()));
    if (inserted) names.push_back(f);
    return it->second;
  };

  SparseDataset data;
  data.bias_index = static_cast<std::size_t>(intern("B"));
  data.rows.reserve(examples.size());
  data.positive.reserve(examples.size());
  for (const auto& [input, label] : examples) {
    std::vector<std::int32_t> row;
    for (const std::string& f : feature_strings(input)) row.push_back(intern(f));
    data.rows.push_back(std::move(row));
    data.positive.push_back(label == Label::ADR ? 1 : 0);
  }
  data.feature_count = names.size();

  std::vector<double> w(names.size(), 0.0);
  if (warm_start) {
    for (std::size_t f = 0; f < names.size(); ++f) w[f] = warm_start->weight(names[f]);
  }

  constexpr int kMaxIterations = 2000;
  constexpr double kGradTolerance = 1e-8;
  constexpr double kArmijo = 1e-4;

  double step = config.learning_rate;
  double loss = logistic_loss(w, data, config.l2);
  std::vector<double> trial(w.size());
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const std::vector<double> grad = logistic_gradient(w, data, config.l2);
    double grad_sq = 0.0;
    double grad_inf = 0.0;
    for (double g : grad) {
      grad_sq += g * g;
      grad_inf = std::max(grad_inf, std::fabs(g));
    }
    if (grad_inf < kGradTolerance) break;

    double trial_step = step;
    double trial_loss = 0.0;
    bool descended = false;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t f = 0; f < w.size(); ++f) trial[f] = w[f] - trial_step * grad[f];
      trial_loss = logistic_loss(trial, data, config.l2);
      if (trial_loss <= loss - kArmijo * trial_step * grad_sq) {
        descended = true;
        break;
      }
      trial_step *= 0.5;
    }
    if (!descended) break;  // no float-representable descent left

    w.swap(trial);
    const double improvement = loss - trial_loss;
    loss = trial_loss;
    step = std::min(trial_step * 2.0, 1e6);
    if (improvement < 1e-14 * std::max(1.0, loss)) break;
  }

  LogLinearModel model;
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (w[f] != 0.0) model.set_weight(names[f], w[f]);
  }
  return model;
}

// --- model reference ----------------------------------------------------------

std::string ModelRef::to_string() const {
  return kind + ":" + trained_on + ":" + std::to_string(seed);
}

std::optional<ModelRef> ModelRef::parse(std::string_view s) {
  const std::size_t first = s.find(':');
  const std::size_t last = s.rfind(':');
  if (first == std::string_view::npos || last == first) return std::nullopt;
  ModelRef ref;
  ref.kind = std::string(s.substr(0, first));
  ref.trained_on = std::string(s.substr(first + 1, last - first - 1));
  const std::string_view seed_part = s.substr(last + 1);
  const auto [ptr, ec] =
      std::from_chars(seed_part.data(), seed_part.data() + seed_part.size(), ref.seed);
  if (ec != std::errc() || ptr != seed_part.data() + seed_part.size()) return std::nullopt;
  return ref;
}

// --- baseline ------------------------------------------------------------------

BaselineClassifier::BaselineClassifier(LogLinearModel model, std::string trained_on,
                                       std::uint64_t seed)
    : model_(std::move(model)), ref_{"baseline", std::move(trained_on), seed} {}

std::vector<double> BaselineClassifier::scores(const std::vector<EntityInContext>& inputs) const {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (const EntityInContext& input : inputs) out.push_back(model_.score(input));
  return out;
}

std::string BaselineClassifier::id() const { return ref_.to_string(); }

std::shared_ptr<Classifier> train_baseline(const TrainConfig& config,
                                           const std::vector<TrainingExample>& examples,
                                           const std::string& trained_on,
                                           const LogLinearModel* warm_start) {
  return std::make_shared<BaselineClassifier>(train_loglinear(config, examples, warm_start),
                                              trained_on, config.seed);
}

std::vector<Prediction> predict(const Classifier& classifier,
                                const std::vector<EntityInContext>& inputs,
                                const std::vector<EntitySpan>& spans) {
  if (inputs.size() != spans.size())
    throw config_error("predict: inputs and spans differ in length");
  const std::vector<double> scores = classifier.scores(inputs);
  if (scores.size() != inputs.size())
    throw integrity_error("classifier " + classifier.id() + " returned " +
                          std::to_string(scores.size()) + " scores for " +
                          std::to_string(inputs.size()) + " inputs");
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (spans[i].review_id != inputs[i].review_id)
      throw integrity_error("predict: span/input review mismatch at position " + std::to_string(i));
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw integrity_error("classifier " + classifier.id() + " returned a score outside [0,1]");
    Prediction p;
    p.review_id = inputs[i].review_id;
    p.span = spans[i];
    p.score = scores[i];
    p.label = scores[i] >= 0.5 ? Label::ADR : Label::NonADR;
    out.push_back(std::move(p));
  }
  return out;
}

// --- external adapter -----------------------------------------------------------

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

json input_to_json(const EntityInContext& input) {
  return json{{"entity_tokens", input.entity_tokens},
              {"context_tokens", input.context_tokens},
              {"review_id", input.review_id}};
}

void run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status != 0)
    throw error("external classifier command failed (" + std::to_string(status) + "): " + cmd);
}

}  // namespace

ExternalClassifier::ExternalClassifier(std::string command, fs::path model_path, ModelRef ref,
                                       Capabilities caps)
    : command_(std::move(command)),
      model_path_(std::move(model_path)),
      ref_(std::move(ref)),
      caps_(caps) {}

std::vector<double> ExternalClassifier::scores(const std::vector<EntityInContext>& inputs) const {
  const fs::path dir = make_scratch_dir();
  const fs::path in_path = dir / "examples.jsonl";
  const fs::path out_path = dir / "predictions.jsonl";

  std::ostringstream buf;
  for (const EntityInContext& input : inputs) buf << input_to_json(input).dump() << '\n';
  write_text_file(in_path, buf.str());

  run_command(command_ + " predict " + quoted_path(model_path_) + " " + quoted_path(in_path) +
              " " + quoted_path(out_path));

  std::vector<double> scores;
  std::istringstream in(read_text_file(out_path));
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const double score = j.at("score").get<double>();
    const std::string label = j.at("label").get<std::string>();
    if ((label == "ADR") != (score >= 0.5))
      throw integrity_error("external classifier violated the label/score invariant at line " +
                            std::to_string(row + 1));
    scores.push_back(score);
    ++row;
  }
  fs::remove_all(dir);
  if (scores.size() != inputs.size())
    throw integrity_error("external classifier returned " + std::to_string(scores.size()) +
                          " predictions for " + std::to_string(inputs.size()) + " inputs");
  return scores;
}

std::shared_ptr<Classifier> train_external(const std::string& command, const TrainConfig& config,
                                           const std::vector<TrainingExample>& examples,
                                           const std::string& trained_on) {
  validate(config);
  const fs::path dir = make_scratch_dir();
  const fs::path train_path = dir / "train.jsonl";
  const fs::path config_path = dir / "config.json";
  const fs::path model_path = dir / "model.bin";

  std::ostringstream buf;
  for (const auto& [input, label] : examples) {
    json j = input_to_json(input);
    j["label"] = std::string(to_string(label));
    buf << j.dump() << '\n';
  }
  write_text_file(train_path, buf.str());
  write_text_file(config_path, json{{"epochs", config.epochs},
                                    {"batch_size", config.batch_size},
                                    {"hidden_units", config.hidden_units},
                                    {"learning_rate", config.learning_rate},
                                    {"l2", config.l2},
                                    {"dropout", config.dropout},
                                    {"seed", config.seed}}
                                   .dump(2) +
                                   "\n");

  run_command(command + " train " + quoted_path(train_path) + " " + quoted_path(model_path) +
              " " + quoted_path(config_path));

  Capabilities caps;
  const fs::path caps_path = dir / "capabilities.json";
  if (std::system((command + " capabilities > " + quoted_path(caps_path)).c_str()) == 0) {
    try {
      const json j = json::parse(read_text_file(caps_path));
      caps.deterministic = j.value("deterministic", false);
      caps.seedable = j.value("seedable", false);
    } catch (const std::exception&) {
      caps = Capabilities{};
    }
  }

  return std::make_shared<ExternalClassifier>(command, model_path,
                                              ModelRef{"external", trained_on, config.seed}, caps);
}

}  // namespace adrpipe
