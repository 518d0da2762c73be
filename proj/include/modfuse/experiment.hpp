#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modfuse/corpus.hpp"
#include "modfuse/encoder.hpp"
#include "modfuse/features.hpp"
#include "modfuse/fusion.hpp"
#include "modfuse/metrics.hpp"
#include "modfuse/splits.hpp"
#include "modfuse/synthgen.hpp"
#include "modfuse/trainer.hpp"

namespace modfuse {

// One grid row: a modality set plus the fusion flavors it is run with.
struct RowSpec {
    std::string key;          // e.g. "audio_text"
    ModalitySet modalities;
    std::vector<std::string> flavors;  // "unimodal" | "early" | "late"
};

struct ExperimentConfig {
    // corpus source: either file paths or an inline synthetic spec
    std::optional<std::filesystem::path> corpus_path;
    std::optional<std::filesystem::path> manifest_path;
    std::optional<SynthSpec> synth;

    ModelConfig model;   // input_dims must cover every modality the rows use
    TrainConfig train;
    int folds = 5;
    int val_movies_per_fold = 4;
    std::uint64_t fold_seed = 0;
    std::vector<std::string> rows = {"vision",      "audio",      "text",
                                     "audio_vision", "audio_text", "vision_audio_text"};
    std::vector<std::string> conditions = {"cmad", "cmsd"};
    std::vector<std::uint64_t> seeds = {1};
    bool enable_text_vision = false;  // the text-vision pair is off by default
    bool save_checkpoints = false;
};

ExperimentConfig experiment_config_from_json(const std::string& text,
                                             const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

// 64-bit FNV-1a over the canonical (key-sorted) JSON form, as a fixed-width
// hex string; key order in the input never changes the hash.
std::string config_hash(const ExperimentConfig& config);

// Expands config.rows into row specs and validates them.
std::vector<RowSpec> enumerate_rows(const ExperimentConfig& config);

// Cells per seed: one per (row, condition, flavor).
std::int64_t cell_count(const ExperimentConfig& config);

struct EvalResult {
    std::string row;
    std::string condition;   // "cmad" | "cmsd"
    std::string flavor;      // "unimodal" | "early" | "late"
    std::uint64_t seed = 0;
    std::vector<int> fold_indices;
    std::vector<double> fold_auc_pr;
    double mean = 0.0;
    std::optional<ConfidenceInterval> ci;          // needs >= 2 fold values
    std::optional<double> attribution_error;       // pooled over folds
    std::int64_t attr_num = 0;
    std::int64_t attr_den = 0;
    bool resumed = false;  // every fold unit loaded from a previous run
};

struct CellFailure {
    std::string cell_id;
    int fold = 0;
    std::string message;
};

struct ResultsTable {
    std::vector<EvalResult> results;
    std::vector<CellFailure> failures;
    int computed_units = 0;
    int resumed_units = 0;
};

// Loaded corpus + features, shared by every cell of a run.
struct Dataset {
    Corpus corpus;
    FeatureStore store;
};

Dataset resolve_dataset(const ExperimentConfig& config);

// Trains the component models of one (row, flavor, condition) cell on one
// fold and evaluates on the row's CMSD test view. Training labels follow the
// condition: "cmad" trains every component on CMAD; "cmsd" trains each
// component on the CMSD of its own input modality set. Validation views use
// the component's training labeling on the fold's validation movies.
struct UnitOutcome {
    double auc_pr = 0.0;
    std::int64_t attr_num = 0;
    std::int64_t attr_den = 0;
    int n_test = 0;
    std::map<std::string, double> test_predictions;
    Ensemble ensemble;
};

UnitOutcome run_unit(const Dataset& dataset, const Fold& fold, const RowSpec& row,
                     const std::string& flavor, const std::string& condition,
                     const ModelConfig& base_model, const TrainConfig& base_train,
                     std::uint64_t unit_seed);

// Runs the whole grid. Fold is the outer loop; existing per-unit JSON files
// under <out_dir>/cells/<config-hash>/ are reused when `resume` is true.
// Writes results.csv and failures.csv.
ResultsTable run_matrix(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                        int workers = 1, bool resume = true);

std::string results_to_csv(const ResultsTable& table);
std::string failures_to_csv(const ResultsTable& table);
ResultsTable results_from_csv(const std::string& text);

}  // namespace modfuse
