#include "funs/funs_net.hpp"

#include <cmath>

namespace funs {

FunsNet::FunsNet(FunsNetConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("FunsNet: dropout must be in [0,1)");
    std::mt19937_64 rng(init_seed);
    const int d = cfg.d, h = cfg.h, z = cfg.z, s = cfg.static_width();

    const int psi_in = 2 + z;
    const double b1 = 1.0 / std::sqrt(static_cast<double>(psi_in));
    psi_w1_ = params_.add("psi.w1", uniform_init(psi_in, h, b1, rng));
    psi_b1_ = params_.add("psi.b1", Matrix(1, h));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(h));
    psi_w2_ = params_.add("psi.w2", uniform_init(h, s, b2, rng));
    psi_b2_ = params_.add("psi.b2", Matrix(1, s));

    impute_ = AttentionLayer::create(params_, "impute", d + h + s, d, rng, cfg.leaky_slope);
    gate_r_ = AttentionLayer::create(params_, "gate_r", d + s + h, h, rng, cfg.leaky_slope);
    gate_u_ = AttentionLayer::create(params_, "gate_u", d + s + h, h, rng, cfg.leaky_slope);
    gate_c_ = AttentionLayer::create(params_, "gate_c", d + s + h, h, rng, cfg.leaky_slope);
    out_ = AttentionLayer::create(params_, "out", h + d + s, h, rng, cfg.leaky_slope);

    phi_w_ = params_.add("phi.w", uniform_init(h, d, b2, rng));
    phi_b_ = params_.add("phi.b", Matrix(1, d));
}

Tape::Id FunsNet::encode_static(Tape& tape, const ParamBinding& bind,
                                const std::vector<double>& mask, const Matrix& labels) const {
    const int n = labels.rows;
    if (static_cast<int>(mask.size()) != n)
        throw DimensionError("encode_static: mask length != label rows");
    if (labels.cols != cfg_.z)
        throw DimensionError("encode_static: label width " + std::to_string(labels.cols) +
                             " != configured z " + std::to_string(cfg_.z));
    Matrix in(n, 2 + cfg_.z);
    for (int i = 0; i < n; ++i) {
        in.at(i, 0) = mask[i];
        in.at(i, 1) = 1.0 - mask[i];
        for (int c = 0; c < cfg_.z; ++c) in.at(i, 2 + c) = labels.at(i, c);
    }
    Tape::Id x = tape.leaf(std::move(in));
    Tape::Id hidden = tape.tanh(
        tape.add_row_broadcast(tape.matmul(x, bind.id(psi_w1_)), bind.id(psi_b1_)));
    return tape.add_row_broadcast(tape.matmul(hidden, bind.id(psi_w2_)), bind.id(psi_b2_));
}

Tape::Id FunsNet::impute_step(Tape& tape, const ParamBinding& bind, Tape::Id x_t,
                              Tape::Id h_prev, Tape::Id s, const SensorGraph& graph) const {
    return impute_.forward(tape, bind, tape.concat_cols(tape.concat_cols(x_t, h_prev), s),
                           graph);
}

Tape::Id FunsNet::fill_gaps(Tape& tape, Tape::Id x_t, Tape::Id z_t,
                            const std::vector<double>& mask) const {
    const Matrix& xv = tape.value(x_t);
    Matrix m_mat(xv.rows, xv.cols);
    Matrix mbar_mat(xv.rows, xv.cols);
    for (int i = 0; i < xv.rows; ++i)
        for (int c = 0; c < xv.cols; ++c) {
            m_mat.at(i, c) = mask[i];
            mbar_mat.at(i, c) = 1.0 - mask[i];
        }
    Tape::Id m_id = tape.leaf(std::move(m_mat));
    Tape::Id mbar_id = tape.leaf(std::move(mbar_mat));
    return tape.add(tape.mul(m_id, x_t), tape.mul(mbar_id, z_t));
}

Tape::Id FunsNet::gru_step(Tape& tape, const ParamBinding& bind, Tape::Id f_t,
                           Tape::Id h_prev, const SensorGraph& graph, bool training,
                           std::mt19937_64& rng) const {
    Tape::Id fh = tape.concat_cols(f_t, h_prev);
    Tape::Id r = tape.sigmoid(gate_r_.forward(tape, bind, fh, graph));
    Tape::Id u = tape.sigmoid(gate_u_.forward(tape, bind, fh, graph));
    Tape::Id c = tape.tanh(gate_c_.forward(
        tape, bind, tape.concat_cols(f_t, tape.mul(r, h_prev)), graph));
    Tape::Id ones = tape.leaf(Matrix::ones(graph.n, cfg_.h));
    Tape::Id h_t = tape.add(tape.mul(u, h_prev), tape.mul(tape.sub(ones, u), c));
    return tape.dropout(h_t, cfg_.dropout, rng, training);
}

Tape::Id FunsNet::predict_step(Tape& tape, const ParamBinding& bind, Tape::Id h_t,
                               Tape::Id f_t, const SensorGraph& graph, bool training,
                               std::mt19937_64& rng) const {
    Tape::Id p = out_.forward(tape, bind, tape.concat_cols(h_t, f_t), graph);
    p = tape.dropout(p, cfg_.dropout, rng, training);
    return tape.add_row_broadcast(tape.matmul(p, bind.id(phi_w_)), bind.id(phi_b_));
}

std::vector<Tape::Id> FunsNet::forward_sequence(Tape& tape, const ParamBinding& bind,
                                                const std::vector<Matrix>& window,
                                                const std::vector<double>& input_mask,
                                                const SensorGraph& graph, bool training,
                                                std::mt19937_64& rng) const {
    if (window.empty()) throw std::invalid_argument("forward_sequence: empty window");
    Tape::Id s = encode_static(tape, bind, input_mask, graph.labels);
    Tape::Id h = tape.leaf(Matrix(graph.n, cfg_.h));  // constant zero initial state

    std::vector<Tape::Id> predictions;
    predictions.reserve(window.size());
    for (const Matrix& x_raw : window) {
        Tape::Id x_t = tape.leaf(x_raw);
        Tape::Id z_t = impute_step(tape, bind, x_t, h, s, graph);
        Tape::Id x_hat = fill_gaps(tape, x_t, z_t, input_mask);
        Tape::Id f_t = tape.concat_cols(x_hat, s);
        h = gru_step(tape, bind, f_t, h, graph, training, rng);
        predictions.push_back(predict_step(tape, bind, h, f_t, graph, training, rng));
    }
    return predictions;
}

}  // namespace funs
