#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "funs/mpnn.hpp"

using namespace funs;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    Matrix m(r, c);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : m.v) x = u(rng);
    return m;
}

SensorGraph random_graph(int n, double edge_prob, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && u(rng) < edge_prob) edges.emplace_back(i, j);
    return SensorGraph::from_edges(n, std::move(edges));
}

double leaky(double x, double slope) { return x >= 0 ? x : slope * x; }

// Naive per-node double loop, no tape, no segment ops.
Matrix mpnn_reference(const AttentionLayer& layer, const ParamSet& params, const Matrix& h,
                      const SensorGraph& g) {
    const Matrix& w_src = params[layer.w_src];
    const Matrix& w_dst = params[layer.w_dst];
    const Matrix& attn = params[layer.attn];
    const Matrix& bias = params[layer.bias];
    const Matrix hs = matmul_plain(h, w_src);
    const Matrix hd = matmul_plain(h, w_dst);

    Matrix out(g.n, layer.d_out);
    for (int i = 0; i < g.n; ++i) {
        std::vector<int> nbrs = g.in_neighbors[i];
        nbrs.push_back(i);
        std::vector<double> scores(nbrs.size());
        for (size_t k = 0; k < nbrs.size(); ++k) {
            double s = 0.0;
            for (int c = 0; c < layer.d_out; ++c)
                s += leaky(hs.at(nbrs[k], c) + hd.at(i, c), layer.slope) * attn.at(c, 0);
            scores[k] = s;
        }
        const double mx = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (double s : scores) z += std::exp(s - mx);
        for (size_t k = 0; k < nbrs.size(); ++k) {
            const double c_ji = std::exp(scores[k] - mx) / z;
            for (int c = 0; c < layer.d_out; ++c)
                out.at(i, c) += c_ji * hs.at(nbrs[k], c);
        }
        for (int c = 0; c < layer.d_out; ++c) out.at(i, c) += bias.at(0, c);
    }
    return out;
}

Matrix layer_forward(const AttentionLayer& layer, const ParamSet& params, const Matrix& h,
                     const SensorGraph& g) {
    Tape tape;
    ParamBinding bind(tape, params);
    return tape.value(layer.forward(tape, bind, tape.leaf(h), g));
}

}  // namespace

TEST_CASE("forward matches double-loop oracle on random graphs") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 8);  // up to 10 nodes
        const int d_in = 2 + static_cast<int>(rng() % 3);
        const int d_out = 1 + static_cast<int>(rng() % 4);
        auto g = random_graph(n, 0.35, rng);
        ParamSet params;
        auto layer = AttentionLayer::create(params, "l", d_in, d_out, rng);
        params[layer.bias] = random_matrix(1, d_out, rng);
        Matrix h = random_matrix(n, d_in, rng);

        CHECK(max_abs_diff(layer_forward(layer, params, h, g),
                           mpnn_reference(layer, params, h, g)) < 1e-8);
    }
}

TEST_CASE("attention coefficients normalize over each augmented neighborhood") {
    std::mt19937_64 rng(43);
    auto g = random_graph(7, 0.4, rng);
    ParamSet params;
    auto layer = AttentionLayer::create(params, "l", 3, 4, rng);
    Matrix h = random_matrix(7, 3, rng);

    std::map<int, double> per_dst;
    std::map<int, int> count;
    for (const auto& ec : layer.attention_scores(params, h, g)) {
        CHECK(ec.coeff > 0.0);
        CHECK(ec.coeff <= 1.0);
        per_dst[ec.dst] += ec.coeff;
        ++count[ec.dst];
    }
    for (int i = 0; i < g.n; ++i) {
        CHECK(per_dst[i] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(count[i] == static_cast<int>(g.in_neighbors[i].size()) + 1);
    }
}

TEST_CASE("isolated node reduces to self transform plus bias") {
    std::mt19937_64 rng(47);
    // node 2 has no edges at all
    auto g = SensorGraph::from_edges(3, {{0, 1}, {1, 0}});
    ParamSet params;
    auto layer = AttentionLayer::create(params, "l", 2, 3, rng);
    params[layer.bias] = random_matrix(1, 3, rng);
    Matrix h = random_matrix(3, 2, rng);

    Matrix out = layer_forward(layer, params, h, g);
    Matrix self = matmul_plain(h, params[layer.w_src]);
    for (int c = 0; c < 3; ++c)
        CHECK(out.at(2, c) == doctest::Approx(self.at(2, c) + params[layer.bias].at(0, c))
                                  .epsilon(1e-12));
}

TEST_CASE("forward is permutation equivariant") {
    std::mt19937_64 rng(53);
    const int n = 8;
    auto g = random_graph(n, 0.3, rng);
    ParamSet params;
    auto layer = AttentionLayer::create(params, "l", 3, 3, rng);
    Matrix h = random_matrix(n, 3, rng);
    Matrix out = layer_forward(layer, params, h, g);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);  // perm[i] = new id of old node i

    std::vector<std::pair<int, int>> pedges;
    for (const auto& [s, d] : g.edges) pedges.emplace_back(perm[s], perm[d]);
    auto pg = SensorGraph::from_edges(n, std::move(pedges));
    Matrix ph(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) ph.at(perm[i], c) = h.at(i, c);

    Matrix pout = layer_forward(layer, params, ph, pg);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            CHECK(pout.at(perm[i], c) == doctest::Approx(out.at(i, c)).epsilon(1e-10));
}

TEST_CASE("output depends only on the augmented in-neighborhood") {
    std::mt19937_64 rng(59);
    // 0 -> 1 -> 2, so node 1 sees {0, 1} and must ignore node 3
    auto g = SensorGraph::from_edges(4, {{0, 1}, {1, 2}});
    ParamSet params;
    auto layer = AttentionLayer::create(params, "l", 2, 2, rng);
    Matrix h = random_matrix(4, 2, rng);
    Matrix base = layer_forward(layer, params, h, g);

    Matrix h2 = h;
    h2.at(3, 0) += 10.0;
    h2.at(3, 1) -= 4.0;
    Matrix bumped = layer_forward(layer, params, h2, g);
    for (int c = 0; c < 2; ++c) {
        CHECK(bumped.at(0, c) == base.at(0, c));
        CHECK(bumped.at(1, c) == base.at(1, c));
        CHECK(bumped.at(2, c) == base.at(2, c));
        CHECK(bumped.at(3, c) != base.at(3, c));
    }
}

TEST_CASE("gradients through the layer match finite differences") {
    std::mt19937_64 rng(61);
    auto g = random_graph(5, 0.4, rng);
    ParamSet params;
    auto layer = AttentionLayer::create(params, "l", 3, 2, rng);
    Matrix h = random_matrix(5, 3, rng);
    Matrix weight = random_matrix(5, 2, rng);

    // w.r.t. the node states
    const double err_h = grad_check(
        [&](Tape& t, Tape::Id x) {
            ParamBinding bind(t, params);
            return t.sum(t.mul(layer.forward(t, bind, x, g), t.leaf(weight)));
        },
        h, 1e-5);
    CHECK(err_h < 1e-4);

    // w.r.t. each parameter matrix, by substituting the probe into the set
    for (int p = 0; p < params.count(); ++p) {
        ParamSet probe = params;
        const double err = grad_check(
            [&](Tape& t, Tape::Id x) {
                std::vector<Tape::Id> ids;
                for (int q = 0; q < probe.count(); ++q)
                    ids.push_back(q == p ? x : t.leaf(probe[q]));
                Tape::Id hid = t.leaf(h);
                std::vector<int> src, dst;
                augmented_edges(g, src, dst);
                auto h_src = t.matmul(hid, ids[layer.w_src]);
                auto h_dst = t.matmul(hid, ids[layer.w_dst]);
                auto m_src = t.gather_rows(h_src, src);
                auto m_dst = t.gather_rows(h_dst, dst);
                auto scores =
                    t.matmul(t.leaky_relu(t.add(m_src, m_dst), layer.slope), ids[layer.attn]);
                auto coeff = t.segment_softmax(scores, dst, g.n);
                auto agg = t.scatter_add_rows(t.col_broadcast_mul(m_src, coeff), dst, g.n);
                auto out = t.add_row_broadcast(agg, ids[layer.bias]);
                return t.sum(t.mul(out, t.leaf(weight)));
            },
            params[p], 1e-5);
        CHECK(err < 1e-4);
    }
}
