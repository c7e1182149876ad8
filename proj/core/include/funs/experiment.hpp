#pragma once

#include <optional>
#include <string>

#include "funs/baselines.hpp"
#include "funs/data.hpp"
#include "funs/funs_net.hpp"
#include "funs/training.hpp"

namespace funs {

enum class ModelKind {
    FunsN,
    FunsNNoLabels,
    Mean,
    Knn,
    Gpr,
    KnnLstm,
    GprLstm,
    AllObservedBound,
};

std::string model_name(ModelKind kind);
ModelKind model_from_name(const std::string& name);

struct ExperimentConfig {
    // Dataset: either synthetic config or CSV paths.
    std::optional<SyntheticConfig> synthetic;
    std::string values_path, coords_path;
    std::optional<std::string> labels_path, edges_path;
    double delta = 0.0;

    std::vector<double> shares{0.5};
    std::vector<uint64_t> seeds{0};
    std::vector<int> horizons{0};
    std::vector<ModelKind> roster{ModelKind::FunsN, ModelKind::Mean};

    int hidden = 8;
    double dropout = 0.25;
    GprConfig gpr;
    TrainConfig train;          // horizon/seed fields overridden per cell
    double train_frac = 0.70;   // P/T for horizon > 0
    double val_frac = 0.85;     // Q/T for horizon > 0
    int64_t cell_budget_ms = 0; // wall-time guard per cell, 0 = off
    std::string output_path = "results.csv";

    void validate() const;
    static ExperimentConfig from_json_file(const std::string& path);
};

struct ResultRow {
    std::string model;
    double share = 0.0;
    int horizon = 0;
    uint64_t seed = 0;
    double val_mse = 0.0;
    double test_mse = 0.0;
    int64_t wall_ms = 0;
    bool failed = false;

    std::string to_csv() const;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    bool all_succeeded = true;
};

// Counter-based sub-seed scheme: every cell derives its RNG seed from
// (base seed, share, horizon, model) via splitmix64, so cells are
// independent of execution order.
uint64_t cell_seed(uint64_t base_seed, double share, int horizon, ModelKind kind);
uint64_t partition_seed(uint64_t base_seed, double share);

// Runs the sweep. Rows are appended to cfg.output_path as each cell
// finishes (header first). jobs > 1 runs cells in a worker pool; row order
// then follows completion order.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                bool dry_run = false);

// One cell, exposed for tests and the acceptance suite.
ResultRow run_cell(const DatasetBundle& bundle, const ExperimentConfig& cfg,
                   ModelKind kind, double share, int horizon, uint64_t seed);

struct SummaryRow {
    std::string model;
    double share = 0.0;
    int horizon = 0;
    double mean_test_mse = 0.0;
    double std_test_mse = 0.0;
    int n_seeds = 0;
    int n_failed = 0;
};

std::vector<SummaryRow> summarize(const std::string& result_path);
std::string render_summary(const std::vector<SummaryRow>& rows);       // aligned text
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);

DatasetBundle load_dataset(const ExperimentConfig& cfg);

}  // namespace funs
