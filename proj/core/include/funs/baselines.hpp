#pragma once

#include "funs/model.hpp"
#include "funs/training.hpp"

namespace funs {

// Per-feature mean of observations at masked nodes over [t_begin, t_end).
std::vector<double> feature_mean(const FeatureSequence& x, const std::vector<double>& node_mask,
                                 int t_begin, int t_end);

// Constant per-feature prediction everywhere.
FeatureSequence mean_predict(const std::vector<double>& train_mean, int T, int n);

// For each node, the set of observed nodes at minimal BFS hop distance
// (edges treated as undirected). Observed nodes map to themselves. Nodes
// unreachable from any observed node get an empty list (global-mean fallback).
std::vector<std::vector<int>> knn_donor_sets(const SensorGraph& graph,
                                             const std::vector<int>& observed);

// Adaptive-k nearest neighbor estimate: mean over the donor set, global
// observed mean when the donor set is empty. Observed rows pass through.
Matrix knn_predict_step(const Matrix& x_t, const std::vector<int>& observed,
                        const SensorGraph& graph);
FeatureSequence impute_knn(const FeatureSequence& x, const std::vector<int>& observed,
                           const SensorGraph& graph);

struct GprConfig {
    double sigma = 3.0;   // RBF length scale, applied on z-scored coordinates
    double noise = 1e-6;  // diagonal jitter

    void validate() const {
        if (sigma <= 0.0) throw std::invalid_argument("GprConfig: sigma must be positive");
        if (noise < 0.0) throw std::invalid_argument("GprConfig: noise must be >= 0");
    }
};

// Spatial GPR posterior mean, fit independently per timestep and feature.
// The kernel factorization is shared across timesteps for one observed set.
class GprImputer {
public:
    GprImputer(const SensorGraph& graph, const std::vector<int>& observed, GprConfig cfg);

    Matrix predict_step(const Matrix& x_t) const;  // observed rows pass through
    FeatureSequence impute(const FeatureSequence& x) const;

private:
    std::vector<int> observed_;
    std::vector<int> query_;
    Matrix chol_;    // lower Cholesky factor of K(O,O) + noise I
    Matrix cross_;   // k(Q, O)
    int n_ = 0;
};

Matrix gpr_predict_step(const Matrix& x_t, const std::vector<int>& observed,
                        const SensorGraph& graph, const GprConfig& cfg);

// Shared-parameter LSTM applied independently per node (nodes are the batch
// dimension); linear readout to d features. Graph structure and input mask
// are ignored, sequences are expected pre-imputed.
class LstmForecaster : public SequenceModel {
public:
    LstmForecaster(int d, int hidden, uint64_t init_seed);

    std::vector<Tape::Id> forward_sequence(Tape& tape, const ParamBinding& bind,
                                           const std::vector<Matrix>& window,
                                           const std::vector<double>& input_mask,
                                           const SensorGraph& graph, bool training,
                                           std::mt19937_64& rng) const override;

    ParamSet& params() override { return params_; }
    const ParamSet& params() const override { return params_; }
    int hidden() const { return h_; }

private:
    struct Gate {
        int w_x, w_h, b;
    };
    Gate make_gate(const std::string& name, std::mt19937_64& rng);

    int d_ = 0;
    int h_ = 0;
    ParamSet params_;
    Gate in_, forget_, out_, cand_;
    int w_y_, b_y_;
};

enum class Imputer { Knn, Gpr };

struct PipelineResult {
    double val_mse = 0.0;
    double test_mse = 0.0;
    TrainReport report;
};

// Impute-then-forecast pipeline: fill every non-input node per the chosen
// imputer, train an LSTM under the standard harness (loss over observed
// nodes), evaluate on the given split.
PipelineResult impute_then_forecast(Imputer method, const SensorGraph& graph,
                                    const FeatureSequence& x, const NodePartition& part,
                                    const TrainConfig& cfg, int lstm_hidden,
                                    const GprConfig& gpr_cfg, int val_begin, int val_end,
                                    int test_begin, int test_end);

}  // namespace funs
