#include "adrpipe/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "json.hpp"

#include "adrpipe/delimited.hpp"
#include "adrpipe/text.hpp"

namespace adrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kKnownKeys = {
    "source_corpus", "source_format", "source_posts",
    "target_corpus", "target_format", "target_posts",
    "raw_reviews",   "strategy",      "strategy_drugs",
    "model",         "tagger",        "epochs",
    "batch_size",    "hidden_units",  "learning_rate",
    "l2",            "dropout",       "seed",
    "k",             "window",        "retrain_mode",
    "adr_texts_only", "confidence_floor", "output_dir"};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

long long parse_int(const std::string& value, const std::string& key) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw parse_error("config key '" + key + "': malformed integer '" + value + "'");
  return out;
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw parse_error("config key '" + key + "': malformed number '" + value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw parse_error("config key '" + key + "': expected true or false, got '" + value + "'");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

ExperimentConfig parse_experiment_config(const fs::path& file) {
  const std::string content = read_text_file(file);
  const fs::path base = file.has_parent_path() ? file.parent_path() : fs::path(".");

  ExperimentConfig config;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  bool saw_strategy = false;
  std::set<std::string> strategy_drugs;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw parse_error(file.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
      throw parse_error(file.string() + ":" + std::to_string(line_no) + ": unknown key '" + key +
                        "'");

    if (key == "source_corpus") config.source_corpus = resolve(base, value);
    else if (key == "source_format") config.source_format = value;
    else if (key == "source_posts") config.source_posts = resolve(base, value);
    else if (key == "target_corpus") config.target_corpus = resolve(base, value);
    else if (key == "target_format") config.target_format = value;
    else if (key == "target_posts") config.target_posts = resolve(base, value);
    else if (key == "raw_reviews") config.raw_reviews = resolve(base, value);
    else if (key == "strategy") {
      config.strategy = SelectionStrategy{selection_kind_from_string(value), {}, 1};
      saw_strategy = true;
    } else if (key == "strategy_drugs") {
      std::istringstream drugs(value);
      std::string drug;
      while (std::getline(drugs, drug, ',')) {
        const std::string normalized = normalize_drug(trim(drug));
        if (!normalized.empty()) strategy_drugs.insert(normalized);
      }
      config.strategy_drugs_given = true;
    } else if (key == "model") config.model = value;
    else if (key == "tagger") config.tagger = value;
    else if (key == "epochs") config.train.epochs = static_cast<int>(parse_int(value, key));
    else if (key == "batch_size") config.train.batch_size = static_cast<int>(parse_int(value, key));
    else if (key == "hidden_units")
      config.train.hidden_units = static_cast<int>(parse_int(value, key));
    else if (key == "learning_rate") config.train.learning_rate = parse_real(value, key);
    else if (key == "l2") config.train.l2 = parse_real(value, key);
    else if (key == "dropout") config.train.dropout = parse_real(value, key);
    else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(value, key));
      config.train.seed = config.seed;
    } else if (key == "k") config.k = static_cast<int>(parse_int(value, key));
    else if (key == "window") {
      if (value != "whole") config.window = static_cast<int>(parse_int(value, key));
    } else if (key == "retrain_mode") config.retrain_mode = value;
    else if (key == "adr_texts_only") config.adr_texts_only = parse_bool(value, key);
    else if (key == "confidence_floor") config.confidence_floor = parse_real(value, key);
    else if (key == "output_dir") config.output_dir = resolve(base, value);
  }

  // raw reviews without an explicit strategy default to the full set
  if (config.raw_reviews && !saw_strategy) config.strategy = SelectionStrategy{};
  if (config.strategy && config.strategy_drugs_given) config.strategy->drugs = strategy_drugs;

  if (const char* env = std::getenv(kOutputDirEnv); env && *env) config.output_dir = fs::path(env);
  return config;
}

ValidationResult validate_config(const ExperimentConfig& config) {
  ValidationResult result;
  auto violation = [&](std::string message) { result.violations.push_back(std::move(message)); };

  if (config.source_corpus.empty()) violation("source_corpus is required");
  else if (!fs::exists(config.source_corpus))
    violation("source_corpus path does not exist: " + config.source_corpus.string());
  const auto check_format = [&](const std::string& format, const std::string& which) {
    if (format != "cadec" && format != "psytar" && format != "interchange")
      violation(which + " must be cadec, psytar or interchange, got '" + format + "'");
  };
  check_format(config.source_format, "source_format");
  if (config.target_corpus) {
    check_format(config.target_format, "target_format");
    if (!fs::exists(*config.target_corpus))
      violation("target_corpus path does not exist: " + config.target_corpus->string());
  }
  if (config.source_posts && !fs::exists(*config.source_posts))
    violation("source_posts path does not exist: " + config.source_posts->string());
  if (config.target_posts && !fs::exists(*config.target_posts))
    violation("target_posts path does not exist: " + config.target_posts->string());
  if (config.raw_reviews && !fs::exists(*config.raw_reviews))
    violation("raw_reviews path does not exist: " + config.raw_reviews->string());

  if (config.strategy && !config.raw_reviews) violation("strategy requires raw_reviews");
  if (config.strategy && !config.target_corpus)
    violation("strategy requires target_corpus (augmentation applies to out-of-dataset runs)");
  if (config.strategy_drugs_given && !config.strategy)
    violation("strategy_drugs requires strategy");
  if (config.strategy && config.strategy->kind == SelectionKind::TargetDrugs &&
      config.strategy_drugs_given && config.strategy->drugs.empty())
    violation("target_drugs strategy requires a non-empty drug set");

  if (config.k < 2) violation("k must be >= 2");
  if (config.train.epochs <= 0) violation("epochs must be positive");
  if (config.train.batch_size <= 0) violation("batch_size must be positive");
  if (config.train.hidden_units <= 0) violation("hidden_units must be positive");
  if (!(config.train.learning_rate > 0)) violation("learning_rate must be positive");
  if (!(config.train.l2 > 0)) violation("l2 must be positive");
  if (config.train.dropout < 0 || config.train.dropout >= 1) violation("dropout must be in [0,1)");
  if (config.window && *config.window < 0) violation("window must be non-negative or 'whole'");
  if (config.confidence_floor < 0 || config.confidence_floor > 1)
    violation("confidence_floor must be in [0,1]");
  if (config.retrain_mode != "scratch" && config.retrain_mode != "continue")
    violation("retrain_mode must be scratch or continue, got '" + config.retrain_mode + "'");
  if (config.model != "baseline" && config.model.rfind("external:", 0) != 0)
    violation("model must be baseline or external:<command>, got '" + config.model + "'");
  if (config.model.rfind("external:", 0) == 0 && config.model.size() == 9)
    violation("external model needs a command");
  if (config.tagger != "gazetteer" && config.tagger.rfind("external:", 0) != 0)
    violation("tagger must be gazetteer or external:<command>, got '" + config.tagger + "'");
  if (config.output_dir.empty()) violation("output_dir is required");
  return result;
}

std::string config_digest(const ExperimentConfig& config) {
  std::ostringstream canon;
  canon << "adr_texts_only=" << (config.adr_texts_only ? "true" : "false") << '\n'
        << "batch_size=" << config.train.batch_size << '\n'
        << "confidence_floor=" << config.confidence_floor << '\n'
        << "dropout=" << config.train.dropout << '\n'
        << "epochs=" << config.train.epochs << '\n'
        << "hidden_units=" << config.train.hidden_units << '\n'
        << "k=" << config.k << '\n'
        << "l2=" << config.train.l2 << '\n'
        << "learning_rate=" << config.train.learning_rate << '\n'
        << "model=" << config.model << '\n'
        << "raw_reviews=" << (config.raw_reviews ? config.raw_reviews->string() : "") << '\n'
        << "retrain_mode=" << config.retrain_mode << '\n'
        << "seed=" << config.seed << '\n'
        << "source_corpus=" << config.source_corpus.string() << '\n'
        << "source_format=" << config.source_format << '\n'
        << "source_posts=" << (config.source_posts ? config.source_posts->string() : "") << '\n'
        << "tagger=" << config.tagger << '\n'
        << "target_corpus=" << (config.target_corpus ? config.target_corpus->string() : "") << '\n'
        << "target_format=" << (config.target_corpus ? config.target_format : "") << '\n'
        << "target_posts=" << (config.target_posts ? config.target_posts->string() : "") << '\n'
        << "window=" << (config.window ? std::to_string(*config.window) : "whole") << '\n';
  if (config.strategy) {
    canon << "strategy=" << to_string(config.strategy->kind) << '\n';
    canon << "strategy_drugs=";
    bool first = true;
    for (const std::string& drug : config.strategy->drugs) {
      if (!first) canon << ',';
      canon << drug;
      first = false;
    }
    canon << '\n';
  }
  const std::string s = canon.str();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Corpus load_corpus(const fs::path& path, const std::string& format,
                   const std::optional<fs::path>& posts) {
  if (format == "cadec") return load_cadec(path);
  if (format == "psytar") {
    const fs::path posts_path = posts ? *posts : default_psytar_posts(path);
    return load_psytar(path, posts_path).corpus;
  }
  if (format == "interchange") return load_interchange(path);
  throw config_error("unknown corpus format: " + format);
}

namespace {

json stats_to_json(const CorpusStats& stats) {
  json by_type = json::object();
  for (const auto& [type, count] : stats.by_original_type) by_type[type] = count;
  return json{{"review_count", stats.review_count},
              {"entity_count", stats.entity_count},
              {"adr_count", stats.adr_count},
              {"non_adr_count", stats.non_adr_count},
              {"drug_count", stats.drug_count},
              {"by_original_type", by_type}};
}

std::shared_ptr<Tagger> make_tagger(const ExperimentConfig& config, const Corpus& source) {
  if (config.tagger == "gazetteer")
    return std::make_shared<Gazetteer>(build_gazetteer(source));
  return std::make_shared<ExternalTagger>(config.tagger.substr(9));
}

std::shared_ptr<const Classifier> train_step1(const ExperimentConfig& config,
                                              const Corpus& source,
                                              std::optional<int> window) {
  std::vector<TrainingExample> examples;
  examples.reserve(source.entities.size());
  for (const LabeledEntity& entity : source.entities) {
    const Review& review = source.reviews.at(entity.span.review_id);
    examples.emplace_back(make_context(review, entity.span, window), entity.label);
  }
  if (config.model == "baseline") return train_baseline(config.train, examples, source.name);
  return train_external(config.model.substr(9), config.train, examples, source.name);
}

ModelFactory make_factory(const ExperimentConfig& config, const Corpus& source,
                          const std::shared_ptr<const Classifier>& step1) {
  if (config.model == "baseline") {
    const bool warm = config.retrain_mode == "continue";
    auto base = std::dynamic_pointer_cast<const BaselineClassifier>(step1);
    return [train = config.train, name = source.name, warm, base](
               const std::vector<TrainingExample>& examples) {
      const LogLinearModel* init = warm && base ? &base->model() : nullptr;
      return std::shared_ptr<const Classifier>(train_baseline(train, examples, name, init));
    };
  }
  const std::string command = config.model.substr(9);
  return [command, train = config.train,
          name = source.name](const std::vector<TrainingExample>& examples) {
    return std::shared_ptr<const Classifier>(train_external(command, train, examples, name));
  };
}

struct PseudoRun {
  PseudoSet set;
  std::vector<Review> selected;
};

PseudoRun build_pseudo(const ExperimentConfig& config, const Corpus& source,
                       const SelectionStrategy& strategy) {
  const std::vector<Review> raw = load_reviews(*config.raw_reviews);
  PseudoRun run;
  run.selected = select(raw, strategy);

  const std::shared_ptr<Tagger> tagger = make_tagger(config, source);
  const std::shared_ptr<const Classifier> step1 = train_step1(config, source, config.window);

  AnnotateOptions options;
  options.strategy = strategy;
  options.adr_texts_only = config.adr_texts_only;
  options.window = config.window;
  for (const auto& [id, review] : source.reviews) options.exclude_texts.insert(review.text);

  run.set = pseudo_annotate(*tagger, *step1, run.selected, options);
  return run;
}

SelectionStrategy resolve_strategy(const ExperimentConfig& config, const Corpus* target) {
  SelectionStrategy strategy = *config.strategy;
  if (strategy.kind == SelectionKind::TargetDrugs && strategy.drugs.empty()) {
    if (!target)
      throw config_error("target_drugs strategy needs strategy_drugs or a target corpus");
    strategy.drugs = target->drugs;
  }
  return strategy;
}

// Removes files created by a failed run so no partial outputs survive.
class OutputGuard {
 public:
  void track(const fs::path& p) { paths_.push_back(p); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    for (const fs::path& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<fs::path> paths_;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
  const ValidationResult validation = validate_config(config);
  if (!validation.ok()) {
    std::string message = "invalid config:";
    for (const std::string& v : validation.violations) message += "\n  - " + v;
    throw config_error(message);
  }

  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);

  const Corpus source = load_corpus(config.source_corpus, config.source_format, config.source_posts);
  std::optional<Corpus> target;
  if (config.target_corpus)
    target = load_corpus(*config.target_corpus, config.target_format, config.target_posts);

  std::optional<SelectionStrategy> strategy;
  std::optional<PseudoRun> pseudo;
  if (config.strategy && config.raw_reviews) {
    strategy = resolve_strategy(config, target ? &*target : nullptr);
    pseudo = build_pseudo(config, source, *strategy);
  }

  const std::shared_ptr<const Classifier> step1 = train_step1(config, source, config.window);
  const ModelFactory factory = make_factory(config, source, step1);

  EvalReport report;
  if (target) {
    std::optional<Augmentation> augmentation;
    if (pseudo) {
      augmentation.emplace();
      augmentation->set = pseudo->set;
      augmentation->confidence_floor = config.confidence_floor;
      std::unordered_set<std::string> keep(pseudo->set.review_ids.begin(),
                                           pseudo->set.review_ids.end());
      for (const Review& review : pseudo->selected) {
        if (keep.count(review.id)) augmentation->reviews.emplace(review.id, review);
      }
    }
    report = run_out_of_dataset(source, *target, augmentation ? &*augmentation : nullptr, factory,
                                config.k, config.seed, config.window);
  } else {
    report = run_in_dataset(source, factory, config.k, config.seed, config.window);
  }
  report.config_digest = config_digest(config);

  RunOutcome outcome;
  outcome.report = report;
  outcome.report_json = config.output_dir / "report.json";
  outcome.summary_tsv = config.output_dir / "summary.tsv";
  outcome.manifest_json = config.output_dir / "manifest.json";

  OutputGuard guard;
  guard.track(outcome.report_json);
  guard.track(outcome.summary_tsv);
  guard.track(outcome.manifest_json);

  std::string train_set = source.name;
  if (pseudo) train_set += " + pseudo[" + std::string(to_string(strategy->kind)) + "]";
  write_report_json(report, outcome.report_json);
  write_report_tsv(report, train_set, step1->id(), outcome.summary_tsv);

  json manifest{{"config_digest", report.config_digest},
                {"k", config.k},
                {"seed", config.seed},
                {"model", step1->id()},
                {"train_set", train_set},
                {"protocol", target ? "out_of_dataset" : "in_dataset"},
                {"corpus_stats", json{{"source", stats_to_json(corpus_stats(source))}}}};
  if (target) manifest["corpus_stats"]["target"] = stats_to_json(corpus_stats(*target));
  if (pseudo) {
    std::size_t adr = 0;
    for (const LabeledEntity& entity : pseudo->set.entities) {
      if (entity.label == Label::ADR) ++adr;
    }
    manifest["pseudo"] = json{{"strategy", std::string(to_string(strategy->kind))},
                              {"selected_reviews", pseudo->selected.size()},
                              {"review_count", pseudo->set.review_count},
                              {"entity_count", pseudo->set.entities.size()},
                              {"adr_count", adr},
                              {"non_adr_count", pseudo->set.entities.size() - adr},
                              {"source_model_id", pseudo->set.source_model_id}};
  }
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  manifest["wall_clock_seconds"] = std::round(elapsed.count() * 1000.0) / 1000.0;
  write_text_file(outcome.manifest_json, manifest.dump(2) + "\n");

  guard.release();
  return outcome;
}

PseudoOutcome run_pseudo(const ExperimentConfig& config) {
  ValidationResult validation = validate_config(config);
  // The pseudo subcommand neither folds nor needs a target when the drug
  // set is explicit, so drop that one requirement.
  std::erase_if(validation.violations, [](const std::string& v) {
    return v.find("strategy requires target_corpus") != std::string::npos;
  });
  if (!config.raw_reviews) validation.violations.push_back("pseudo requires raw_reviews");
  if (!validation.ok()) {
    std::string message = "invalid config:";
    for (const std::string& v : validation.violations) message += "\n  - " + v;
    throw config_error(message);
  }

  fs::create_directories(config.output_dir);
  const Corpus source = load_corpus(config.source_corpus, config.source_format, config.source_posts);
  std::optional<Corpus> target;
  if (config.target_corpus)
    target = load_corpus(*config.target_corpus, config.target_format, config.target_posts);

  const SelectionStrategy strategy = resolve_strategy(config, target ? &*target : nullptr);
  PseudoRun run = build_pseudo(config, source, strategy);

  PseudoOutcome outcome;
  outcome.set = run.set;
  outcome.selected_reviews = run.selected.size();
  outcome.entities_json = config.output_dir / "pseudo.jsonl";
  outcome.manifest_json = config.output_dir / "pseudo_manifest.json";

  OutputGuard guard;
  guard.track(outcome.entities_json);
  guard.track(outcome.manifest_json);
  save_pseudo_set(run.set, run.selected, outcome.entities_json, outcome.manifest_json);
  guard.release();
  return outcome;
}

}  // namespace adrpipe
