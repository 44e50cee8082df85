#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adrpipe/harness.hpp"
#include "adrpipe/pseudo.hpp"

namespace adrpipe {

// One experiment = one result-table row. Parsed from a flat key=value file;
// unknown keys are parse errors. Relative paths resolve against the config
// file's directory.
struct ExperimentConfig {
  std::filesystem::path source_corpus;
  std::string source_format = "interchange";  // cadec | psytar | interchange
  std::optional<std::filesystem::path> source_posts;

  std::optional<std::filesystem::path> target_corpus;  // absent => in-dataset
  std::string target_format = "interchange";
  std::optional<std::filesystem::path> target_posts;

  std::optional<std::filesystem::path> raw_reviews;
  std::optional<SelectionStrategy> strategy;
  bool strategy_drugs_given = false;  // explicit strategy_drugs key present

  std::string model = "baseline";     // baseline | external:<command>
  std::string tagger = "gazetteer";   // gazetteer | external:<command>
  TrainConfig train;
  int k = 5;
  std::uint64_t seed = 42;
  std::optional<int> window;          // absent = whole review
  std::string retrain_mode = "scratch";  // scratch | continue
  bool adr_texts_only = false;
  double confidence_floor = 0.0;
  std::filesystem::path output_dir;
};

// Environment variable that overrides output_dir when set.
inline constexpr const char* kOutputDirEnv = "ADRPIPE_OUTPUT_DIR";

ExperimentConfig parse_experiment_config(const std::filesystem::path& file);

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Static checks only: schema, ranges, path existence. Never mutates state.
ValidationResult validate_config(const ExperimentConfig& config);

// Stable digest of the effective configuration. Identical configs replay to
// byte-identical reports.
std::string config_digest(const ExperimentConfig& config);

Corpus load_corpus(const std::filesystem::path& path, const std::string& format,
                   const std::optional<std::filesystem::path>& posts);

struct RunOutcome {
  EvalReport report;
  std::filesystem::path report_json;
  std::filesystem::path summary_tsv;
  std::filesystem::path manifest_json;
};

// Full pipeline for one config: load, (optionally) pseudo-annotate, run the
// in- or out-of-dataset protocol, write report.json / summary.tsv /
// manifest.json into output_dir. Partial outputs are removed on failure.
RunOutcome run_experiment(const ExperimentConfig& config);

struct PseudoOutcome {
  PseudoSet set;
  std::size_t selected_reviews = 0;
  std::filesystem::path entities_json;
  std::filesystem::path manifest_json;
};

// Steps 2-3 only: select raw reviews, pseudo-annotate them with models
// trained on the source corpus, persist the PseudoSet.
PseudoOutcome run_pseudo(const ExperimentConfig& config);

}  // namespace adrpipe
