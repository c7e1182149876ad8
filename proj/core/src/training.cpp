#include "funs/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace funs {

std::string TrainReport::to_text() const {
    std::ostringstream os;
    for (const auto& e : epochs) {
        os << "epoch=" << e.epoch << " train_loss=" << e.train_loss;
        if (std::isfinite(e.val_mse)) os << " val_mse=" << e.val_mse;
        os << "\n";
    }
    os << "best_epoch=" << best_epoch << " best_val_mse=" << best_val_mse
       << " test_mse=" << test_mse << "\n";
    return os.str();
}

int sample_window_start(int train_len, int window_len, int horizon, std::mt19937_64& rng) {
    const int max_start = train_len - window_len - horizon;
    if (max_start < 0)
        throw std::invalid_argument("sample_window_start: window_len + horizon exceeds training length");
    if (max_start == 0) return 0;
    std::uniform_int_distribution<int> u(0, max_start);
    return u(rng);
}

double masked_mse(const std::vector<Matrix>& pred, const std::vector<Matrix>& target,
                  const std::vector<double>& node_mask) {
    if (pred.size() != target.size())
        throw DimensionError("masked_mse: step count mismatch");
    int selected = 0;
    for (double m : node_mask)
        if (m != 0.0) ++selected;
    if (selected == 0) throw std::invalid_argument("masked_mse: empty node mask");

    double acc = 0.0;
    size_t count = 0;
    for (size_t t = 0; t < pred.size(); ++t) {
        require_same_shape(pred[t], target[t], "masked_mse");
        for (int i = 0; i < pred[t].rows; ++i) {
            if (node_mask[i] == 0.0) continue;
            for (int c = 0; c < pred[t].cols; ++c) {
                const double diff = pred[t].at(i, c) - target[t].at(i, c);
                acc += diff * diff;
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

void AdamOptimizer::step(ParamSet& params, const std::vector<Matrix>& grads) {
    if (static_cast<int>(grads.size()) != params.count())
        throw DimensionError("AdamOptimizer: gradient count mismatch");
    if (m_.empty()) {
        for (int i = 0; i < params.count(); ++i) {
            m_.emplace_back(params[i].rows, params[i].cols);
            v_.emplace_back(params[i].rows, params[i].cols);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (int p = 0; p < params.count(); ++p) {
        Matrix& w = params[p];
        const Matrix& g = grads[p];
        for (size_t i = 0; i < w.v.size(); ++i) {
            m_[p].v[i] = beta1_ * m_[p].v[i] + (1.0 - beta1_) * g.v[i];
            v_[p].v[i] = beta2_ * v_[p].v[i] + (1.0 - beta2_) * g.v[i] * g.v[i];
            const double mhat = m_[p].v[i] / bc1;
            const double vhat = v_[p].v[i] / bc2;
            w.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

// Target slice with entries outside the node mask forced to zero, so masked
// loss terms never touch (possibly invalid) values at excluded nodes.
Matrix masked_target_step(const FeatureSequence& seq, int t, const std::vector<double>& mask) {
    Matrix out(seq.n, seq.d);
    for (int i = 0; i < seq.n; ++i)
        if (mask[i] != 0.0)
            for (int f = 0; f < seq.d; ++f) out.at(i, f) = seq.at(t, i, f);
    return out;
}

std::vector<Matrix> slice_window(const FeatureSequence& seq, int begin, int len) {
    std::vector<Matrix> out;
    out.reserve(len);
    for (int t = begin; t < begin + len; ++t) out.push_back(seq.step(t));
    return out;
}

}  // namespace

double evaluate_model(const SequenceModel& model, const SensorGraph& graph,
                      const FeatureSequence& eval_inputs,
                      const std::vector<double>& eval_input_mask,
                      const FeatureSequence& targets, const std::vector<double>& node_mask,
                      int horizon, int score_begin, int score_end) {
    const int feed_len = score_end - horizon;
    if (feed_len < 1 || score_begin >= score_end)
        throw std::invalid_argument("evaluate_model: empty scoring range");
    auto window = slice_window(eval_inputs, 0, feed_len);
    auto preds = model.predict(window, eval_input_mask, graph);

    std::vector<Matrix> scored_preds, scored_targets;
    for (int w = 0; w < feed_len; ++w) {
        const int target_step = w + horizon;
        if (target_step < score_begin || target_step >= score_end) continue;
        scored_preds.push_back(preds[w]);
        scored_targets.push_back(masked_target_step(targets, target_step, node_mask));
    }
    if (scored_preds.empty())
        throw std::invalid_argument("evaluate_model: no prediction/target pairs in range");
    return masked_mse(scored_preds, scored_targets, node_mask);
}

TrainReport train_model(SequenceModel& model, const TrainTask& task, const TrainConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t_start)
            .count();
    };

    std::mt19937_64 rng(cfg.seed);
    AdamOptimizer opt(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    const SensorGraph& graph = *task.graph;
    const int d = task.targets->d;

    TrainReport report;
    ParamSet best_params = model.params();
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    int loss_nodes = 0;
    for (double m : task.loss_mask)
        if (m != 0.0) ++loss_nodes;
    if (loss_nodes == 0) throw std::invalid_argument("train_model: empty loss mask");

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int w = 0; w < cfg.windows_per_epoch; ++w) {
            const int start =
                sample_window_start(task.train_len, cfg.window_len, cfg.horizon, rng);
            auto window = slice_window(*task.train_inputs, start, cfg.window_len);

            Tape tape;
            ParamBinding bind(tape, model.params());
            auto preds = model.forward_sequence(tape, bind, window, task.train_input_mask,
                                                graph, true, rng);

            Tape::Id total = -1;
            for (int k = 0; k < cfg.window_len; ++k) {
                Tape::Id target =
                    tape.leaf(masked_target_step(*task.targets, start + k + cfg.horizon,
                                                 task.loss_mask));
                Matrix mask_mat(graph.n, d);
                for (int i = 0; i < graph.n; ++i)
                    for (int f = 0; f < d; ++f) mask_mat.at(i, f) = task.loss_mask[i];
                Tape::Id diff = tape.sub(preds[k], target);
                Tape::Id sq = tape.mul(tape.mul(diff, diff), tape.leaf(std::move(mask_mat)));
                Tape::Id part = tape.sum(sq);
                total = (total < 0) ? part : tape.add(total, part);
            }
            Tape::Id loss = tape.scale(
                total, 1.0 / (static_cast<double>(cfg.window_len) * loss_nodes * d));
            const double loss_value = tape.value(loss).v[0];
            if (!std::isfinite(loss_value))
                throw TrainingDiverged("train_model: non-finite loss at epoch " +
                                       std::to_string(epoch));
            epoch_loss += loss_value;

            tape.backward(loss);
            std::vector<Matrix> grads;
            grads.reserve(model.params().count());
            for (int p = 0; p < model.params().count(); ++p)
                grads.push_back(tape.adjoint(bind.id(p)));
            opt.step(model.params(), grads);
        }
        epoch_loss /= cfg.windows_per_epoch;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss;
        rec.val_mse = std::numeric_limits<double>::quiet_NaN();

        const bool budget_hit = cfg.time_budget_ms > 0 && elapsed_ms() > cfg.time_budget_ms;
        if (epoch % cfg.val_every == 0 || epoch == cfg.epochs - 1 || budget_hit) {
            rec.val_mse = evaluate_model(model, graph, *task.eval_inputs,
                                         task.eval_input_mask, *task.targets, task.val_mask,
                                         cfg.horizon, task.val_begin, task.val_end);
            if (rec.val_mse < best_val) {
                best_val = rec.val_mse;
                best_params = model.params();
                report.best_epoch = epoch;
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
            }
        }
        report.epochs.push_back(rec);

        if (budget_hit) {
            report.budget_exhausted = true;
            break;
        }
        if (epochs_since_best >= cfg.patience) {
            report.stopped_early = true;
            break;
        }
    }

    model.params() = best_params;
    report.best_val_mse = best_val;
    return report;
}

}  // namespace funs
