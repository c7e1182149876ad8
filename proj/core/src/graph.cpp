#include "funs/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace funs {

SensorGraph SensorGraph::from_edges(int n, std::vector<std::pair<int, int>> edges,
                                    Matrix labels) {
    SensorGraph g;
    g.n = n;
    g.in_neighbors.assign(n, {});
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= n || dst < 0 || dst >= n)
            throw std::out_of_range("SensorGraph: edge endpoint out of range");
        g.in_neighbors[dst].push_back(src);
    }
    g.edges = std::move(edges);
    if (labels.rows == 0) labels = Matrix::ones(n, 1);
    if (labels.rows != n)
        throw DimensionError("SensorGraph: labels row count != n");
    g.labels = std::move(labels);
    return g;
}

std::vector<int> NodePartition::observed() const {
    std::vector<int> obs = v_in;
    obs.insert(obs.end(), v_opt.begin(), v_opt.end());
    std::sort(obs.begin(), obs.end());
    return obs;
}

uint64_t NodePartition::hash() const {
    // FNV-1a over the four sets with separators.
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](uint64_t x) {
        h ^= x;
        h *= 1099511628211ull;
    };
    for (const auto* set : {&v_in, &v_opt, &v_val, &v_test}) {
        for (int i : *set) mix(static_cast<uint64_t>(i) + 1);
        mix(0xfffffffffffffffull);
    }
    return h;
}

std::vector<double> build_mask(const std::vector<int>& subset, int n) {
    std::vector<double> m(n, 0.0);
    for (int i : subset) {
        if (i < 0 || i >= n) throw std::out_of_range("build_mask: node index out of range");
        m[i] = 1.0;
    }
    return m;
}

std::vector<double> complement_mask(const std::vector<double>& m) {
    std::vector<double> out(m.size());
    for (size_t i = 0; i < m.size(); ++i) out[i] = 1.0 - m[i];
    return out;
}

FeatureSequence apply_mask(const FeatureSequence& x, const std::vector<double>& m) {
    if (static_cast<int>(m.size()) != x.n)
        throw DimensionError("apply_mask: mask length != node count");
    FeatureSequence out = x;
    for (int t = 0; t < x.T; ++t)
        for (int i = 0; i < x.n; ++i)
            if (m[i] == 0.0)
                for (int f = 0; f < x.d; ++f) out.at(t, i, f) = 0.0;
    return out;
}

Matrix apply_mask_step(const Matrix& x, const std::vector<double>& m) {
    if (static_cast<int>(m.size()) != x.rows)
        throw DimensionError("apply_mask_step: mask length != row count");
    Matrix out = x;
    for (int i = 0; i < x.rows; ++i)
        if (m[i] == 0.0)
            for (int c = 0; c < x.cols; ++c) out.at(i, c) = 0.0;
    return out;
}

NodePartition split_nodes(int n, double observed_share, uint64_t seed) {
    if (observed_share <= 0.0 || observed_share >= 1.0)
        throw std::invalid_argument("split_nodes: observed_share must be in (0,1)");
    const int n_obs = static_cast<int>(std::lround(observed_share * n));

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    NodePartition p;
    const int n_in = n_obs / 2;  // floor, remainder to v_opt
    p.v_in.assign(perm.begin(), perm.begin() + n_in);
    p.v_opt.assign(perm.begin() + n_in, perm.begin() + n_obs);
    const int n_hidden = n - n_obs;
    const int n_val = n_hidden / 2;
    p.v_val.assign(perm.begin() + n_obs, perm.begin() + n_obs + n_val);
    p.v_test.assign(perm.begin() + n_obs + n_val, perm.end());
    for (auto* set : {&p.v_in, &p.v_opt, &p.v_val, &p.v_test}) {
        if (set->empty())
            throw std::invalid_argument("split_nodes: share " + std::to_string(observed_share) +
                                        " leaves an empty node set for n=" + std::to_string(n));
        std::sort(set->begin(), set->end());
    }
    return p;
}

ThresholdGraphResult threshold_graph(const std::vector<std::pair<double, double>>& coords,
                                     double delta) {
    if (delta <= 0.0) throw std::invalid_argument("threshold_graph: delta must be positive");
    if (coords.size() < 2) throw std::invalid_argument("threshold_graph: need at least 2 nodes");
    ThresholdGraphResult res;
    const int n = static_cast<int>(coords.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dx = coords[i].first - coords[j].first;
            const double dy = coords[i].second - coords[j].second;
            const double dist = std::sqrt(dx * dx + dy * dy);
            if (dist > 0.0 && dist <= delta) {
                res.edges.emplace_back(i, j);
                res.edges.emplace_back(j, i);
            }
        }
    res.all_isolated = res.edges.empty();
    return res;
}

}  // namespace funs
