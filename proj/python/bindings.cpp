#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "adrpipe/experiment.hpp"

namespace py = pybind11;
using namespace adrpipe;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pseudo-annotation pipeline for entity-level ADR classification";

  py::enum_<Label>(m, "Label").value("ADR", Label::ADR).value("NonADR", Label::NonADR);
  py::enum_<Provenance>(m, "Provenance")
      .value("Gold", Provenance::Gold)
      .value("Pseudo", Provenance::Pseudo);
  py::enum_<SelectionKind>(m, "SelectionKind")
      .value("Full", SelectionKind::Full)
      .value("TargetDrugs", SelectionKind::TargetDrugs)
      .value("MinRating", SelectionKind::MinRating);

  py::class_<Review>(m, "Review")
      .def(py::init<>())
      .def_readwrite("id", &Review::id)
      .def_readwrite("drug", &Review::drug)
      .def_readwrite("rating", &Review::rating)
      .def_readwrite("text", &Review::text);

  py::class_<EntitySpan>(m, "EntitySpan")
      .def(py::init<>())
      .def_readwrite("review_id", &EntitySpan::review_id)
      .def_readwrite("fragments", &EntitySpan::fragments)
      .def_readwrite("surface", &EntitySpan::surface);

  py::class_<LabeledEntity>(m, "LabeledEntity")
      .def(py::init<>())
      .def_readwrite("span", &LabeledEntity::span)
      .def_readwrite("label", &LabeledEntity::label)
      .def_readwrite("provenance", &LabeledEntity::provenance)
      .def_readwrite("confidence", &LabeledEntity::confidence)
      .def_readwrite("original_type", &LabeledEntity::original_type);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_readwrite("name", &Corpus::name)
      .def_readwrite("reviews", &Corpus::reviews)
      .def_readwrite("entities", &Corpus::entities)
      .def_readwrite("drugs", &Corpus::drugs);

  py::class_<CorpusStats>(m, "CorpusStats")
      .def_readonly("review_count", &CorpusStats::review_count)
      .def_readonly("entity_count", &CorpusStats::entity_count)
      .def_readonly("adr_count", &CorpusStats::adr_count)
      .def_readonly("non_adr_count", &CorpusStats::non_adr_count)
      .def_readonly("drug_count", &CorpusStats::drug_count)
      .def_readonly("by_original_type", &CorpusStats::by_original_type);

  py::class_<SkippedRow>(m, "SkippedRow")
      .def_readonly("row", &SkippedRow::row)
      .def_readonly("post_id", &SkippedRow::post_id)
      .def_readonly("phrase", &SkippedRow::phrase)
      .def_readonly("reason", &SkippedRow::reason);

  m.def("load_cadec", &load_cadec, py::arg("directory"));
  m.def(
      "load_psytar",
      [](const std::filesystem::path& annotations,
         const std::optional<std::filesystem::path>& posts) {
        const PsytarLoad load =
            load_psytar(annotations, posts ? *posts : default_psytar_posts(annotations));
        return py::make_tuple(load.corpus, load.skipped);
      },
      py::arg("annotations"), py::arg("posts") = std::nullopt,
      "Returns (corpus, skipped_rows)");
  m.def("load_reviews", &load_reviews, py::arg("file"));
  m.def("write_reviews", &write_reviews, py::arg("reviews"), py::arg("file"));
  m.def("corpus_stats", &corpus_stats, py::arg("corpus"));
  m.def("save_interchange", &save_interchange, py::arg("corpus"), py::arg("file"));
  m.def("load_interchange", &load_interchange, py::arg("file"));
  m.def("validate_corpus", [](const Corpus& corpus) { validate(corpus); }, py::arg("corpus"));

  py::class_<Tagger, std::shared_ptr<Tagger>>(m, "Tagger")
      .def("extract", &Tagger::extract)
      .def("id", &Tagger::id);
  py::class_<Gazetteer, Tagger, std::shared_ptr<Gazetteer>>(m, "Gazetteer")
      .def_property_readonly("phrase_count", &Gazetteer::phrase_count)
      .def_property_readonly("max_phrase_tokens", &Gazetteer::max_phrase_tokens)
      .def("contains", &Gazetteer::contains);
  m.def("build_gazetteer",
        [](const Corpus& corpus) { return std::make_shared<Gazetteer>(build_gazetteer(corpus)); });
  m.def("extract_entities", &extract_entities, py::arg("tagger"), py::arg("review"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("hidden_units", &TrainConfig::hidden_units)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("l2", &TrainConfig::l2)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<EntityInContext>(m, "EntityInContext")
      .def(py::init<>())
      .def_readwrite("entity_tokens", &EntityInContext::entity_tokens)
      .def_readwrite("context_tokens", &EntityInContext::context_tokens)
      .def_readwrite("review_id", &EntityInContext::review_id);

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("review_id", &Prediction::review_id)
      .def_readonly("span", &Prediction::span)
      .def_readonly("label", &Prediction::label)
      .def_readonly("score", &Prediction::score);

  py::class_<Capabilities>(m, "Capabilities")
      .def_readonly("deterministic", &Capabilities::deterministic)
      .def_readonly("seedable", &Capabilities::seedable);

  py::class_<Classifier, std::shared_ptr<Classifier>>(m, "Classifier")
      .def("scores", &Classifier::scores)
      .def("id", &Classifier::id)
      .def("capabilities", &Classifier::capabilities);

  m.def("make_context", &make_context, py::arg("review"), py::arg("span"),
        py::arg("window") = std::nullopt);
  m.def("feature_strings", &feature_strings, py::arg("input"));
  m.def(
      "train_baseline",
      [](const TrainConfig& config, const std::vector<TrainingExample>& examples,
         const std::string& trained_on) { return train_baseline(config, examples, trained_on); },
      py::arg("config"), py::arg("examples"), py::arg("trained_on"));
  m.def("predict", &predict, py::arg("classifier"), py::arg("inputs"), py::arg("spans"));

  py::class_<SelectionStrategy>(m, "SelectionStrategy")
      .def(py::init<>())
      .def_readwrite("kind", &SelectionStrategy::kind)
      .def_readwrite("drugs", &SelectionStrategy::drugs)
      .def_readwrite("rating_threshold", &SelectionStrategy::rating_threshold);

  py::class_<PseudoSet>(m, "PseudoSet")
      .def_readonly("strategy", &PseudoSet::strategy)
      .def_readonly("entities", &PseudoSet::entities)
      .def_readonly("source_model_id", &PseudoSet::source_model_id)
      .def_readonly("review_count", &PseudoSet::review_count)
      .def_readonly("review_ids", &PseudoSet::review_ids);

  py::class_<AnnotateOptions>(m, "AnnotateOptions")
      .def(py::init<>())
      .def_readwrite("strategy", &AnnotateOptions::strategy)
      .def_readwrite("exclude_texts", &AnnotateOptions::exclude_texts)
      .def_readwrite("adr_texts_only", &AnnotateOptions::adr_texts_only)
      .def_readwrite("window", &AnnotateOptions::window);

  m.def(
      "select",
      [](const std::vector<Review>& reviews, const SelectionStrategy& strategy) {
        return adrpipe::select(reviews, strategy);
      },
      py::arg("reviews"), py::arg("strategy"));
  m.def("pseudo_annotate", &pseudo_annotate, py::arg("tagger"), py::arg("classifier"),
        py::arg("reviews"), py::arg("options") = AnnotateOptions{});
  m.def("augment", &augment, py::arg("gold"), py::arg("pseudo"),
        py::arg("confidence_floor") = 0.0);
  m.def("save_pseudo_set", &save_pseudo_set, py::arg("set"), py::arg("review_pool"),
        py::arg("entities_file"), py::arg("manifest_file"));
  py::class_<PseudoLoad>(m, "PseudoLoad")
      .def_readonly("set", &PseudoLoad::set)
      .def_readonly("reviews", &PseudoLoad::reviews);
  m.def("load_pseudo_set", &load_pseudo_set, py::arg("entities_file"), py::arg("manifest_file"));

  py::class_<FoldAssignment>(m, "FoldAssignment")
      .def_readonly("k", &FoldAssignment::k)
      .def_readonly("seed", &FoldAssignment::seed)
      .def_readonly("assignment", &FoldAssignment::assignment);
  m.def("make_folds", &make_folds, py::arg("corpus"), py::arg("k"), py::arg("seed"));

  py::class_<ClassMetrics>(m, "ClassMetrics")
      .def_readonly("precision", &ClassMetrics::precision)
      .def_readonly("recall", &ClassMetrics::recall)
      .def_readonly("f1", &ClassMetrics::f1)
      .def_readonly("support", &ClassMetrics::support);

  py::class_<MetricsRecord>(m, "MetricsRecord")
      .def_readonly("adr", &MetricsRecord::adr)
      .def_readonly("non_adr", &MetricsRecord::non_adr)
      .def_readonly("macro_precision", &MetricsRecord::macro_precision)
      .def_readonly("macro_recall", &MetricsRecord::macro_recall)
      .def_readonly("macro_f1", &MetricsRecord::macro_f1);
  m.def("compute_metrics", &compute_metrics, py::arg("gold"), py::arg("predictions"));

  py::class_<FoldResult>(m, "FoldResult")
      .def_readonly("fold", &FoldResult::fold)
      .def_readonly("skipped", &FoldResult::skipped)
      .def_readonly("skip_reason", &FoldResult::skip_reason)
      .def_readonly("metrics", &FoldResult::metrics)
      .def_readonly("train_gold", &FoldResult::train_gold)
      .def_readonly("train_pseudo", &FoldResult::train_pseudo)
      .def_readonly("train_review_ids", &FoldResult::train_review_ids)
      .def_readonly("test_review_ids", &FoldResult::test_review_ids);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("per_fold", &EvalReport::per_fold)
      .def_readonly("averaged", &EvalReport::averaged)
      .def_readonly("config_digest", &EvalReport::config_digest)
      .def_readonly("train_gold_total", &EvalReport::train_gold_total)
      .def_readonly("train_pseudo_total", &EvalReport::train_pseudo_total)
      .def_readonly("k", &EvalReport::k)
      .def_readonly("seed", &EvalReport::seed);

  py::class_<Augmentation>(m, "Augmentation")
      .def(py::init<>())
      .def_readwrite("set", &Augmentation::set)
      .def_readwrite("reviews", &Augmentation::reviews)
      .def_readwrite("confidence_floor", &Augmentation::confidence_floor);

  m.def(
      "run_in_dataset",
      [](const Corpus& corpus, const TrainConfig& config, int k, std::uint64_t seed,
         std::optional<int> window) {
        return run_in_dataset(corpus, baseline_factory(config, corpus.name), k, seed, window);
      },
      py::arg("corpus"), py::arg("config"), py::arg("k") = 5, py::arg("seed") = 42,
      py::arg("window") = std::nullopt, "5-fold in-dataset run with the baseline classifier");
  m.def(
      "run_out_of_dataset",
      [](const Corpus& source, const Corpus& target, const std::optional<Augmentation>& aug,
         const TrainConfig& config, int k, std::uint64_t seed, std::optional<int> window) {
        return run_out_of_dataset(source, target, aug ? &*aug : nullptr,
                                  baseline_factory(config, source.name), k, seed, window);
      },
      py::arg("source"), py::arg("target"), py::arg("augmentation") = std::nullopt,
      py::arg("config") = TrainConfig{}, py::arg("k") = 5, py::arg("seed") = 42,
      py::arg("window") = std::nullopt,
      "Out-of-dataset run with the baseline classifier");

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readonly("source_corpus", &ExperimentConfig::source_corpus)
      .def_readonly("target_corpus", &ExperimentConfig::target_corpus)
      .def_readonly("raw_reviews", &ExperimentConfig::raw_reviews)
      .def_readonly("model", &ExperimentConfig::model)
      .def_readonly("k", &ExperimentConfig::k)
      .def_readonly("seed", &ExperimentConfig::seed)
      .def_readonly("output_dir", &ExperimentConfig::output_dir);

  py::class_<ValidationResult>(m, "ValidationResult")
      .def_readonly("violations", &ValidationResult::violations)
      .def("ok", &ValidationResult::ok);

  py::class_<RunOutcome>(m, "RunOutcome")
      .def_readonly("report", &RunOutcome::report)
      .def_readonly("report_json", &RunOutcome::report_json)
      .def_readonly("summary_tsv", &RunOutcome::summary_tsv)
      .def_readonly("manifest_json", &RunOutcome::manifest_json);

  m.def("parse_experiment_config", &parse_experiment_config, py::arg("file"));
  m.def("validate_config", &validate_config, py::arg("config"));
  m.def("config_digest", &config_digest, py::arg("config"));
  m.def("run_experiment", &run_experiment, py::arg("config"));

  py::register_exception<parse_error>(m, "ParseError");
  py::register_exception<integrity_error>(m, "IntegrityError");
  py::register_exception<schema_error>(m, "SchemaError");
  py::register_exception<value_error>(m, "ValueError_");
  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<alignment_error>(m, "AlignmentError");
  py::register_exception<provenance_error>(m, "ProvenanceError");
}
