#pragma once

#include <cstdint>
#include <string>

#include "funs/model.hpp"

namespace funs {

struct TrainConfig {
    int horizon = 0;
    int window_len = 24;
    int epochs = 30;
    int windows_per_epoch = 8;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int patience = 20;        // early stopping, epochs without val improvement
    int val_every = 1;        // validate every k-th epoch
    uint64_t seed = 0;
    int64_t time_budget_ms = 0;  // 0 = unlimited; training stops once exceeded

    void validate() const {
        if (horizon < 0) throw std::invalid_argument("TrainConfig: horizon must be >= 0");
        if (window_len < 1) throw std::invalid_argument("TrainConfig: window_len must be >= 1");
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;  // NaN when not validated this epoch
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_mse = 0.0;
    double test_mse = 0.0;  // filled by the caller after final evaluation
    bool stopped_early = false;
    bool budget_exhausted = false;

    std::string to_text() const;  // one record per line
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform window start: W = V + window_len, targets [V+horizon : W+horizon)
// must stay within the training range [0, train_len).
int sample_window_start(int train_len, int window_len, int horizon, std::mt19937_64& rng);

// MSE over node_mask-selected nodes, all steps and features. Target entries
// outside the mask are never read.
double masked_mse(const std::vector<Matrix>& pred, const std::vector<Matrix>& target,
                  const std::vector<double>& node_mask);

// Adam. State is positional over the ParamSet.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamSet& params, const std::vector<Matrix>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Matrix> m_, v_;
};

// Everything one training run needs. Input sequences are prepared by the
// caller: train_inputs already has non-input nodes zeroed (or imputed, for
// baseline pipelines), eval_inputs has all observed nodes present.
struct TrainTask {
    const SensorGraph* graph = nullptr;
    const FeatureSequence* train_inputs = nullptr;   // model input during training
    const FeatureSequence* targets = nullptr;        // ground truth, loss-masked reads only
    std::vector<double> train_input_mask;            // v_in indicator
    std::vector<double> loss_mask;                   // observed set indicator
    const FeatureSequence* eval_inputs = nullptr;    // full-history input for validation
    std::vector<double> eval_input_mask;             // observed set indicator
    std::vector<double> val_mask;                    // v_val indicator
    int train_len = 0;   // P; training windows stay within [0, P)
    int val_begin = 0;   // validation scoring range [val_begin, val_end)
    int val_end = 0;
};

// BPTT training loop with Adam, best-validation checkpointing and early
// stopping. Model parameters end at the best validation epoch.
TrainReport train_model(SequenceModel& model, const TrainTask& task, const TrainConfig& cfg);

// Feeds eval_inputs (steps [0, score_end - horizon)) through the model in
// eval mode and scores predictions whose target step falls in
// [score_begin, score_end) on node_mask nodes.
double evaluate_model(const SequenceModel& model, const SensorGraph& graph,
                      const FeatureSequence& eval_inputs,
                      const std::vector<double>& eval_input_mask,
                      const FeatureSequence& targets, const std::vector<double>& node_mask,
                      int horizon, int score_begin, int score_end);

}  // namespace funs
