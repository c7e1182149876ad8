#pragma once

#include "funs/graph.hpp"
#include "funs/model.hpp"
#include "funs/mpnn.hpp"
#include "funs/params.hpp"

namespace funs {

struct FunsNetConfig {
    int d = 2;        // feature width
    int z = 1;        // static label width
    int h = 8;        // hidden width
    int s = 0;        // static-state width; 0 means "use h"
    double dropout = 0.25;
    double leaky_slope = 0.2;

    int static_width() const { return s > 0 ? s : h; }
};

// Recurrent graph network: static encoding, attention-based imputation, mask
// fill-in, graph-gated GRU, and an output MPNN + linear readout. Hidden state
// starts at all zeros; predictions are emitted at every timestep.
class FunsNet : public SequenceModel {
public:
    FunsNet(FunsNetConfig cfg, uint64_t init_seed);

    // S = psi(m || m_bar || L), one tanh hidden layer of width h, linear out.
    Tape::Id encode_static(Tape& tape, const ParamBinding& bind,
                           const std::vector<double>& mask, const Matrix& labels) const;

    // Z_t = MPNN(X_t || H_prev || S)
    Tape::Id impute_step(Tape& tape, const ParamBinding& bind, Tape::Id x_t,
                         Tape::Id h_prev, Tape::Id s, const SensorGraph& graph) const;

    // Xhat_t = m (.) X_t + m_bar (.) Z_t
    Tape::Id fill_gaps(Tape& tape, Tape::Id x_t, Tape::Id z_t,
                       const std::vector<double>& mask) const;

    // R = sigmoid(MPNN(F||H)), U = sigmoid(MPNN(F||H)),
    // C = tanh(MPNN(F||R(.)H)), H_t = U(.)H + (1-U)(.)C.
    // Dropout on H_t in training mode.
    Tape::Id gru_step(Tape& tape, const ParamBinding& bind, Tape::Id f_t,
                      Tape::Id h_prev, const SensorGraph& graph, bool training,
                      std::mt19937_64& rng) const;

    // Yhat_t = phi(MPNN(H_t || F_t)), phi linear h -> d.
    Tape::Id predict_step(Tape& tape, const ParamBinding& bind, Tape::Id h_t,
                          Tape::Id f_t, const SensorGraph& graph, bool training,
                          std::mt19937_64& rng) const;

    // Full unroll. window holds the already mask-zeroed n x d inputs per step.
    // Returns one prediction id per step; the tape stays alive for loss
    // construction and backward.
    std::vector<Tape::Id> forward_sequence(Tape& tape, const ParamBinding& bind,
                                           const std::vector<Matrix>& window,
                                           const std::vector<double>& input_mask,
                                           const SensorGraph& graph, bool training,
                                           std::mt19937_64& rng) const override;

    ParamSet& params() override { return params_; }
    const ParamSet& params() const override { return params_; }
    const FunsNetConfig& config() const { return cfg_; }

private:
    FunsNetConfig cfg_;
    ParamSet params_;
    int psi_w1_, psi_b1_, psi_w2_, psi_b2_;  // static MLP
    AttentionLayer impute_;
    AttentionLayer gate_r_, gate_u_, gate_c_;
    AttentionLayer out_;
    int phi_w_, phi_b_;  // readout
};

}  // namespace funs
