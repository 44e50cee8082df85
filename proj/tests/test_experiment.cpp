#include "doctest.h"

#include <fstream>

#include "adrpipe/delimited.hpp"
#include "adrpipe/experiment.hpp"

#include "json.hpp"

#include "support.hpp"

using namespace adrpipe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path path = dir / "exp.cfg";
  write_text_file(path, body);
  return path;
}

std::string in_dataset_config(const fs::path& out_dir) {
  return "source_corpus = " + (adrtest::fixtures_dir() / "cadec_synth").string() +
         "\nsource_format = cadec\nk = 5\nseed = 42\noutput_dir = " + out_dir.string() + "\n";
}

}  // namespace

TEST_CASE("config parsing resolves relative paths against the config directory") {
  const fs::path dir = adrtest::temp_dir("cfg");
  fs::create_directories(dir / "data");
  write_text_file(dir / "data" / "c.jsonl", "{\"name\":\"x\"}\n");
  const fs::path path = write_config(
      dir, "source_corpus = data/c.jsonl\noutput_dir = out\n# comment\n\nseed = 7\n");
  const ExperimentConfig config = parse_experiment_config(path);
  CHECK(config.source_corpus == dir / "data" / "c.jsonl");
  CHECK(config.output_dir == dir / "out");
  CHECK(config.seed == 7);
  CHECK(config.train.seed == 7);
  fs::remove_all(dir);
}

TEST_CASE("window config key parses both forms") {
  const fs::path dir = adrtest::temp_dir("cfgwin");
  const ExperimentConfig bounded =
      parse_experiment_config(write_config(dir, "source_corpus = x\nwindow = 2\noutput_dir = o\n"));
  CHECK(bounded.window == 2);
  const ExperimentConfig whole = parse_experiment_config(
      write_config(dir, "source_corpus = x\nwindow = whole\noutput_dir = o\n"));
  CHECK_FALSE(whole.window.has_value());
  fs::remove_all(dir);
}

TEST_CASE("unknown config keys fail fast") {
  const fs::path dir = adrtest::temp_dir("cfg2");
  const fs::path path = write_config(dir, "source_corpus = x\nsource_fromat = cadec\n");
  CHECK_THROWS_WITH_AS(parse_experiment_config(path), doctest::Contains("source_fromat"),
                       parse_error);
  fs::remove_all(dir);
}

TEST_CASE("validate_config reports violations as data") {
  const fs::path dir = adrtest::temp_dir("cfg3");
  SUBCASE("strategy without raw_reviews") {
    ExperimentConfig config = parse_experiment_config(
        write_config(dir, in_dataset_config(dir / "out") + "strategy = full\nraw_reviews = " +
                              (adrtest::fixtures_dir() / "reviews_raw.csv").string() + "\n"));
    config.raw_reviews.reset();
    const ValidationResult result = validate_config(config);
    bool found = false;
    for (const std::string& violation : result.violations)
      if (violation.find("strategy requires raw_reviews") != std::string::npos) found = true;
    CHECK(found);
  }
  SUBCASE("minimal in-dataset config is ok") {
    const ExperimentConfig config =
        parse_experiment_config(write_config(dir, in_dataset_config(dir / "out")));
    CHECK(validate_config(config).ok());
  }
  SUBCASE("k = 1 is rejected") {
    const ExperimentConfig config = parse_experiment_config(
        write_config(dir, in_dataset_config(dir / "out") + "k = 1\n"));
    const ValidationResult result = validate_config(config);
    bool found = false;
    for (const std::string& violation : result.violations)
      if (violation.find("k must be >= 2") != std::string::npos) found = true;
    CHECK(found);
  }
  SUBCASE("missing paths are violations, not crashes") {
    const ExperimentConfig config = parse_experiment_config(
        write_config(dir, "source_corpus = /nonexistent/qqq\noutput_dir = out\n"));
    CHECK_FALSE(validate_config(config).ok());
  }
  fs::remove_all(dir);
}

TEST_CASE("run_experiment on the bundled separable corpus reports macro F 1.0") {
  const fs::path dir = adrtest::temp_dir("run1");
  const ExperimentConfig config =
      parse_experiment_config(write_config(dir, in_dataset_config(dir / "out")));
  const RunOutcome outcome = run_experiment(config);
  CHECK(outcome.report.averaged.macro_f1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs::exists(outcome.report_json));
  CHECK(fs::exists(outcome.summary_tsv));
  CHECK(fs::exists(outcome.manifest_json));
  const json report = json::parse(read_text_file(outcome.report_json));
  CHECK(report["averaged"]["macro"]["f1"] == 1.0);
  CHECK(report["config_digest"] == config_digest(config));
  fs::remove_all(dir);
}

TEST_CASE("identical configs replay to byte-identical reports") {
  const fs::path dir = adrtest::temp_dir("run2");
  const ExperimentConfig a = parse_experiment_config(
      write_config(dir, in_dataset_config(dir / "out_a")));
  ExperimentConfig b = a;
  b.output_dir = dir / "out_b";
  const RunOutcome ra = run_experiment(a);
  const RunOutcome rb = run_experiment(b);
  CHECK(read_text_file(ra.report_json) == read_text_file(rb.report_json));
  CHECK(read_text_file(ra.summary_tsv) == read_text_file(rb.summary_tsv));
  fs::remove_all(dir);
}

TEST_CASE("manifest corpus stats equal corpus_stats exactly") {
  const fs::path dir = adrtest::temp_dir("run3");
  const ExperimentConfig config =
      parse_experiment_config(write_config(dir, in_dataset_config(dir / "out")));
  const RunOutcome outcome = run_experiment(config);
  const json manifest = json::parse(read_text_file(outcome.manifest_json));
  const CorpusStats stats = corpus_stats(load_cadec(adrtest::fixtures_dir() / "cadec_synth"));
  CHECK(manifest["corpus_stats"]["source"]["review_count"] == stats.review_count);
  CHECK(manifest["corpus_stats"]["source"]["entity_count"] == stats.entity_count);
  CHECK(manifest["corpus_stats"]["source"]["adr_count"] == stats.adr_count);
  CHECK(manifest["corpus_stats"]["source"]["non_adr_count"] == stats.non_adr_count);
  CHECK(manifest["corpus_stats"]["source"]["drug_count"] == stats.drug_count);
  fs::remove_all(dir);
}

TEST_CASE("out-of-dataset run with augmentation records the pseudo breakdown") {
  const fs::path dir = adrtest::temp_dir("run4");
  const std::string body =
      "source_corpus = " + (adrtest::fixtures_dir() / "cadec_synth").string() +
      "\nsource_format = cadec"
      "\ntarget_corpus = " + (adrtest::fixtures_dir() / "psytar_gap.tsv").string() +
      "\ntarget_format = psytar"
      "\nraw_reviews = " + (adrtest::fixtures_dir() / "reviews_raw.csv").string() +
      "\nstrategy = min_rating"
      "\nk = 5\nseed = 42\noutput_dir = " + (dir / "out").string() + "\n";
  const ExperimentConfig config = parse_experiment_config(write_config(dir, body));
  const RunOutcome outcome = run_experiment(config);
  CHECK(outcome.report.train_pseudo_total > 0);
  const json report = json::parse(read_text_file(outcome.report_json));
  CHECK(report["provenance_breakdown"]["pseudo"].get<std::size_t>() > 0);
  const json manifest = json::parse(read_text_file(outcome.manifest_json));
  const auto expected = adrtest::fixture_counts()["reviews"];
  CHECK(manifest["pseudo"]["selected_reviews"] ==
        expected["min_rating_count"].get<std::size_t>());
  fs::remove_all(dir);
}

TEST_CASE("failed runs leave no partial outputs") {
  const fs::path dir = adrtest::temp_dir("run5");
  // in-dataset config with k larger than the review count: make_folds throws
  const ExperimentConfig config = parse_experiment_config(
      write_config(dir, in_dataset_config(dir / "out") + "k = 100\n"));
  CHECK_THROWS_AS(run_experiment(config), config_error);
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  CHECK_FALSE(fs::exists(dir / "out" / "summary.tsv"));
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("run_pseudo persists a reloadable pseudo set") {
  const fs::path dir = adrtest::temp_dir("run6");
  const std::string body =
      "source_corpus = " + (adrtest::fixtures_dir() / "cadec_synth").string() +
      "\nsource_format = cadec"
      "\nraw_reviews = " + (adrtest::fixtures_dir() / "reviews_raw.csv").string() +
      "\nstrategy = target_drugs"
      "\nstrategy_drugs = EFFETEST, CYMBATEST"
      "\nseed = 42\noutput_dir = " + (dir / "out").string() + "\n";
  const ExperimentConfig config = parse_experiment_config(write_config(dir, body));
  const PseudoOutcome outcome = run_pseudo(config);
  const auto expected = adrtest::fixture_counts()["reviews"];
  CHECK(outcome.selected_reviews == expected["psytar_gap_target_count"].get<std::size_t>());
  CHECK(outcome.set.entities.size() > 0);
  const PseudoLoad loaded = load_pseudo_set(outcome.entities_json, outcome.manifest_json);
  CHECK(loaded.set.entities == outcome.set.entities);
  CHECK(loaded.set.strategy.kind == SelectionKind::TargetDrugs);
  fs::remove_all(dir);
}

TEST_CASE("output_dir environment override wins") {
  const fs::path dir = adrtest::temp_dir("run7");
  const fs::path env_out = dir / "env_out";
  setenv(kOutputDirEnv, env_out.string().c_str(), 1);
  const ExperimentConfig config =
      parse_experiment_config(write_config(dir, in_dataset_config(dir / "ignored")));
  unsetenv(kOutputDirEnv);
  CHECK(config.output_dir == env_out);
  fs::remove_all(dir);
}
