#pragma once

#include <functional>
#include <random>
#include <vector>

#include "funs/matrix.hpp"

namespace funs {

// Reverse-mode autodiff over Matrix values. The tape is define-by-run and
// rebuilt every forward pass; node ids are indices into the tape, issued in
// topological order, so backward() is a single reverse sweep.
class Tape {
public:
    using Id = int;

    enum class Op {
        Leaf,
        MatMul,
        Add,
        Sub,
        Mul,
        Sigmoid,
        Tanh,
        LeakyRelu,
        Dropout,
        ConcatCols,
        GatherRows,
        ScatterAddRows,
        SegmentSoftmax,
        ColBroadcastMul,
        AddRowBroadcast,
        Sum,
        Scale,
    };

    struct Node {
        Op op = Op::Leaf;
        Id a = -1;
        Id b = -1;
        Matrix value;
        Matrix adjoint;
        bool requires_grad = false;
        double scalar = 0.0;             // leaky slope / scale factor
        std::vector<int> indices;        // gather/scatter/segment targets
        std::vector<double> keep_mask;   // dropout survivor scaling
        int aux = 0;                     // output row count for scatter
    };

    Id leaf(Matrix value, bool requires_grad = false);

    Id matmul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);  // Hadamard
    Id sigmoid(Id a);
    Id tanh(Id a);
    Id leaky_relu(Id a, double slope = 0.2);
    // Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
    // Identity when training == false.
    Id dropout(Id a, double p, std::mt19937_64& rng, bool training);
    Id concat_cols(Id a, Id b);
    Id gather_rows(Id a, std::vector<int> idx);
    Id scatter_add_rows(Id a, std::vector<int> idx, int out_rows);
    // scores: E x 1, segment[e] in [0, n_segments); softmax normalized within
    // each segment (numerically stabilized by per-segment max).
    Id segment_softmax(Id scores, std::vector<int> segment, int n_segments);
    Id col_broadcast_mul(Id a, Id coeff);      // (E x d) * (E x 1) per row
    Id add_row_broadcast(Id a, Id row);        // (n x d) + (1 x d) per row
    Id sum(Id a);                              // 1 x 1
    Id scale(Id a, double s);

    const Matrix& value(Id id) const { return nodes_[id].value; }
    const Matrix& adjoint(Id id) const { return nodes_[id].adjoint; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds adjoint(loss) = 1 and propagates; loss must be 1x1. Adjoints
    // accumulate additively across fan-out.
    void backward(Id loss);

private:
    Id push(Node n);
    void backward_node(Id id);

    std::vector<Node> nodes_;
};

// Worst-case relative error between analytic gradient of f at x and central
// finite differences with step eps. f builds the scalar loss on the given
// tape from a leaf holding x.
double grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                  const Matrix& x, double eps);

}  // namespace funs
