#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "funs/matrix.hpp"

namespace funs {

// Directed sensor graph. Edge (j, i) means v_j -> v_i; in_neighbors[i] lists
// all j with such an edge.
struct SensorGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;           // (src, dst)
    std::vector<std::vector<int>> in_neighbors;
    std::vector<std::pair<double, double>> coords;    // optional, empty if absent
    Matrix labels;                                    // n x z static node labels

    static SensorGraph from_edges(int n, std::vector<std::pair<int, int>> edges,
                                  Matrix labels = {});

    bool has_coords() const { return !coords.empty(); }
};

// T x n x d observation tensor, time-major. step(t) views one n x d slice.
struct FeatureSequence {
    int T = 0;
    int n = 0;
    int d = 0;
    std::vector<double> values;  // T*n*d, [t][node][feature]

    FeatureSequence() = default;
    FeatureSequence(int T_, int n_, int d_)
        : T(T_), n(n_), d(d_), values(static_cast<size_t>(T_) * n_ * d_, 0.0) {}

    double& at(int t, int i, int f) {
        return values[(static_cast<size_t>(t) * n + i) * d + f];
    }
    double at(int t, int i, int f) const {
        return values[(static_cast<size_t>(t) * n + i) * d + f];
    }
    Matrix step(int t) const {
        Matrix m(n, d);
        std::copy(values.begin() + static_cast<size_t>(t) * n * d,
                  values.begin() + static_cast<size_t>(t + 1) * n * d, m.v.begin());
        return m;
    }
};

// Disjoint node splits: v_in/v_opt partition the observed set, v_val/v_test
// partition the unobserved complement.
struct NodePartition {
    std::vector<int> v_in;
    std::vector<int> v_opt;
    std::vector<int> v_val;
    std::vector<int> v_test;

    std::vector<int> observed() const;  // v_in + v_opt, sorted
    uint64_t hash() const;              // stable digest for run logs
};

struct TimeSplit {
    int P = 0;  // end of training range [0, P)
    int Q = 0;  // end of validation range [P, Q)
    int T = 0;

    void validate() const {
        if (!(0 < P && P < Q && Q < T))
            throw std::invalid_argument("TimeSplit: need 0 < P < Q < T");
    }
};

// m_i = 1 iff i is in subset.
std::vector<double> build_mask(const std::vector<int>& subset, int n);
std::vector<double> complement_mask(const std::vector<double>& m);

// Zero out features of nodes with m_i = 0, all timesteps and feature dims.
FeatureSequence apply_mask(const FeatureSequence& x, const std::vector<double>& m);
Matrix apply_mask_step(const Matrix& x, const std::vector<double>& m);

// Uniform random node split: round(observed_share*n) observed nodes, halved
// into v_in/v_opt (floor to v_in); remainder halved into v_val/v_test.
// Deterministic per seed. Throws if any of the four sets comes out empty.
NodePartition split_nodes(int n, double observed_share, uint64_t seed);

struct ThresholdGraphResult {
    std::vector<std::pair<int, int>> edges;
    bool all_isolated = false;
};

// Both directed edges (i,j),(j,i) iff 0 < euclidean distance <= delta.
ThresholdGraphResult threshold_graph(const std::vector<std::pair<double, double>>& coords,
                                     double delta);

}  // namespace funs
