#pragma once

#include "funs/graph.hpp"
#include "funs/params.hpp"
#include "funs/tape.hpp"

namespace funs {

// Single-head attention message passing layer. Scores follow the GATv2
// ordering: e_ji = a^T leaky_relu(H_j W_src + H_i W_dst), softmax-normalized
// over the augmented neighborhood N_i + {i} (self-loop added here, not stored
// in the graph).
struct AttentionLayer {
    int d_in = 0;
    int d_out = 0;
    double slope = 0.2;
    int w_src = -1;  // indices into the owning ParamSet
    int w_dst = -1;
    int attn = -1;   // d_out x 1
    int bias = -1;   // 1 x d_out

    static AttentionLayer create(ParamSet& params, const std::string& prefix,
                                 int d_in, int d_out, std::mt19937_64& rng,
                                 double slope = 0.2);

    // out_i = sum_{j in N_i + {i}} c_ji (H_j W_src) + b
    Tape::Id forward(Tape& tape, const ParamBinding& bind, Tape::Id h,
                     const SensorGraph& graph) const;

    // Normalized coefficients per augmented edge, for inspection/tests.
    // Returns (src, dst, coefficient) triples in the layer's edge order.
    struct EdgeCoeff {
        int src;
        int dst;
        double coeff;
    };
    std::vector<EdgeCoeff> attention_scores(const ParamSet& params, const Matrix& h,
                                            const SensorGraph& graph) const;
};

// Edge endpoints with one self-loop per node appended; shared by forward and
// the coefficient inspection path.
void augmented_edges(const SensorGraph& graph, std::vector<int>& src, std::vector<int>& dst);

}  // namespace funs
