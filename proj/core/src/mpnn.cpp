#include "funs/mpnn.hpp"

#include <cmath>

namespace funs {

void augmented_edges(const SensorGraph& graph, std::vector<int>& src, std::vector<int>& dst) {
    src.clear();
    dst.clear();
    src.reserve(graph.edges.size() + graph.n);
    dst.reserve(graph.edges.size() + graph.n);
    for (const auto& [s, d] : graph.edges) {
        src.push_back(s);
        dst.push_back(d);
    }
    for (int i = 0; i < graph.n; ++i) {
        src.push_back(i);
        dst.push_back(i);
    }
}

AttentionLayer AttentionLayer::create(ParamSet& params, const std::string& prefix,
                                      int d_in, int d_out, std::mt19937_64& rng,
                                      double slope) {
    if (d_out <= 0) throw std::invalid_argument("AttentionLayer: d_out must be positive");
    AttentionLayer l;
    l.d_in = d_in;
    l.d_out = d_out;
    l.slope = slope;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    l.w_src = params.add(prefix + ".w_src", uniform_init(d_in, d_out, bound, rng));
    l.w_dst = params.add(prefix + ".w_dst", uniform_init(d_in, d_out, bound, rng));
    l.attn = params.add(prefix + ".attn", uniform_init(d_out, 1, bound, rng));
    l.bias = params.add(prefix + ".bias", Matrix(1, d_out));
    return l;
}

Tape::Id AttentionLayer::forward(Tape& tape, const ParamBinding& bind, Tape::Id h,
                                 const SensorGraph& graph) const {
    if (tape.value(h).rows != graph.n)
        throw DimensionError("mpnn_forward: node state rows != graph size");
    if (tape.value(h).cols != d_in)
        throw DimensionError("mpnn_forward: input width " +
                             std::to_string(tape.value(h).cols) + " != layer d_in " +
                             std::to_string(d_in));
    std::vector<int> src, dst;
    augmented_edges(graph, src, dst);

    Tape::Id h_src = tape.matmul(h, bind.id(w_src));
    Tape::Id h_dst = tape.matmul(h, bind.id(w_dst));
    Tape::Id m_src = tape.gather_rows(h_src, src);
    Tape::Id m_dst = tape.gather_rows(h_dst, dst);
    Tape::Id scores = tape.matmul(tape.leaky_relu(tape.add(m_src, m_dst), slope), bind.id(attn));
    Tape::Id coeff = tape.segment_softmax(scores, dst, graph.n);
    Tape::Id weighted = tape.col_broadcast_mul(m_src, coeff);
    Tape::Id agg = tape.scatter_add_rows(weighted, std::move(dst), graph.n);
    return tape.add_row_broadcast(agg, bind.id(bias));
}

std::vector<AttentionLayer::EdgeCoeff> AttentionLayer::attention_scores(
    const ParamSet& params, const Matrix& h, const SensorGraph& graph) const {
    Tape tape;
    ParamBinding bind(tape, params);
    Tape::Id hid = tape.leaf(h);

    std::vector<int> src, dst;
    augmented_edges(graph, src, dst);
    Tape::Id h_src = tape.matmul(hid, bind.id(w_src));
    Tape::Id h_dst = tape.matmul(hid, bind.id(w_dst));
    Tape::Id m_src = tape.gather_rows(h_src, src);
    Tape::Id m_dst = tape.gather_rows(h_dst, dst);
    Tape::Id scores = tape.matmul(tape.leaky_relu(tape.add(m_src, m_dst), slope), bind.id(attn));
    Tape::Id coeff = tape.segment_softmax(scores, dst, graph.n);

    const Matrix& c = tape.value(coeff);
    std::vector<EdgeCoeff> out(src.size());
    for (size_t e = 0; e < src.size(); ++e) out[e] = {src[e], dst[e], c.v[e]};
    return out;
}

}  // namespace funs
