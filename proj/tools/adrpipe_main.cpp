#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "adrpipe/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

void print_stats(const std::string& name, const adrpipe::CorpusStats& stats) {
  std::cout << "corpus: " << name << "\n"
            << "reviews: " << stats.review_count << "\n"
            << "entities: " << stats.entity_count << "\n"
            << "adr: " << stats.adr_count << "\n"
            << "non_adr: " << stats.non_adr_count << "\n"
            << "drugs: " << stats.drug_count << "\n";
  for (const auto& [type, count] : stats.by_original_type)
    std::cout << "type." << type << ": " << count << "\n";
}

int do_validate(const std::string& config_path) {
  const adrpipe::ExperimentConfig config =
      adrpipe::parse_experiment_config(config_path);
  const adrpipe::ValidationResult result = adrpipe::validate_config(config);
  if (result.ok()) {
    std::cout << "ok\n";
    return kOk;
  }
  for (const std::string& violation : result.violations)
    std::cout << "violation: " << violation << "\n";
  return kValidationFailure;
}

int do_run(const std::string& config_path, bool dry_run) {
  const adrpipe::ExperimentConfig config =
      adrpipe::parse_experiment_config(config_path);
  const adrpipe::ValidationResult validation = adrpipe::validate_config(config);
  if (!validation.ok()) {
    for (const std::string& violation : validation.violations)
      std::cerr << "violation: " << violation << "\n";
    return kValidationFailure;
  }
  if (dry_run) {
    const adrpipe::Corpus source =
        adrpipe::load_corpus(config.source_corpus, config.source_format, config.source_posts);
    print_stats("source(" + source.name + ")", adrpipe::corpus_stats(source));
    if (config.target_corpus) {
      const adrpipe::Corpus target =
          adrpipe::load_corpus(*config.target_corpus, config.target_format, config.target_posts);
      print_stats("target(" + target.name + ")", adrpipe::corpus_stats(target));
    }
    std::cout << "config_digest: " << adrpipe::config_digest(config) << "\n";
    return kOk;
  }
  const adrpipe::RunOutcome outcome = adrpipe::run_experiment(config);
  std::cout << "report: " << outcome.report_json.string() << "\n"
            << "summary: " << outcome.summary_tsv.string() << "\n"
            << "manifest: " << outcome.manifest_json.string() << "\n";
  std::printf("macro_f1: %.3f\n", outcome.report.averaged.macro_f1);
  return kOk;
}

int do_pseudo(const std::string& config_path) {
  const adrpipe::ExperimentConfig config =
      adrpipe::parse_experiment_config(config_path);
  const adrpipe::PseudoOutcome outcome = adrpipe::run_pseudo(config);
  std::cout << "selected_reviews: " << outcome.selected_reviews << "\n"
            << "annotated_reviews: " << outcome.set.review_count << "\n"
            << "pseudo_entities: " << outcome.set.entities.size() << "\n"
            << "entities: " << outcome.entities_json.string() << "\n"
            << "manifest: " << outcome.manifest_json.string() << "\n";
  return kOk;
}

int do_stats(const std::string& path, const std::string& format, const std::string& posts) {
  if (format == "reviews") {
    const std::vector<adrpipe::Review> reviews = adrpipe::load_reviews(path);
    std::set<std::string> drugs;
    std::size_t rated = 0;
    for (const adrpipe::Review& review : reviews) {
      drugs.insert(review.drug);
      if (review.rating) ++rated;
    }
    std::cout << "reviews: " << reviews.size() << "\n"
              << "drugs: " << drugs.size() << "\n"
              << "rated: " << rated << "\n";
    return kOk;
  }
  if (format == "psytar") {
    const std::filesystem::path posts_path =
        posts.empty() ? adrpipe::default_psytar_posts(path) : std::filesystem::path(posts);
    const adrpipe::PsytarLoad load = adrpipe::load_psytar(path, posts_path);
    print_stats(load.corpus.name, adrpipe::corpus_stats(load.corpus));
    std::cout << "skipped_rows: " << load.skipped.size() << "\n";
    for (const adrpipe::SkippedRow& row : load.skipped)
      std::cout << "skipped: row " << row.row << " post " << row.post_id << " (" << row.reason
                << ")\n";
    return kOk;
  }
  const adrpipe::Corpus corpus = adrpipe::load_corpus(path, format, std::nullopt);
  print_stats(corpus.name, adrpipe::corpus_stats(corpus));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-annotation pipeline for entity-level ADR classification"};
  app.require_subcommand(1);

  std::string config_path;
  bool dry_run = false;
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Path to the experiment config")->required();
  run->add_flag("--dry-run", dry_run, "Validate and print corpus stats without training");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Validate a config file");
  validate->add_option("config", validate_path, "Path to the experiment config")->required();

  std::string pseudo_path;
  CLI::App* pseudo =
      app.add_subcommand("pseudo", "Pseudo-annotate raw reviews and persist the result");
  pseudo->add_option("config", pseudo_path, "Path to the experiment config")->required();

  std::string stats_path, stats_format, stats_posts;
  CLI::App* stats = app.add_subcommand("stats", "Print corpus statistics");
  stats->add_option("corpus", stats_path, "Corpus path")->required();
  stats->add_option("--format", stats_format, "cadec | psytar | reviews | interchange")
      ->required()
      ->check(CLI::IsMember({"cadec", "psytar", "reviews", "interchange"}));
  stats->add_option("--posts", stats_posts, "PsyTAR posts file (default: <stem>_posts<ext>)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, dry_run);
    if (validate->parsed()) return do_validate(validate_path);
    if (pseudo->parsed()) return do_pseudo(pseudo_path);
    if (stats->parsed()) return do_stats(stats_path, stats_format, stats_posts);
  } catch (const adrpipe::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const adrpipe::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}
