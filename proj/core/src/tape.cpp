#include "funs/tape.hpp"

#include <algorithm>
#include <cmath>

namespace funs {

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Matrix value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = matmul_plain(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    const Matrix& bv = nodes_[b].value;
    for (size_t i = 0; i < n.value.v.size(); ++i) n.value.v[i] += bv.v[i];
    return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    const Matrix& bv = nodes_[b].value;
    for (size_t i = 0; i < n.value.v.size(); ++i) n.value.v[i] -= bv.v[i];
    return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    const Matrix& bv = nodes_[b].value;
    for (size_t i = 0; i < n.value.v.size(); ++i) n.value.v[i] *= bv.v[i];
    return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x = std::tanh(x);
    return push(std::move(n));
}

Tape::Id Tape::leaky_relu(Id a, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.scalar = slope;
    n.value = nodes_[a].value;
    for (double& x : n.value.v)
        if (x < 0.0) x *= slope;
    return push(std::move(n));
}

Tape::Id Tape::dropout(Id a, double p, std::mt19937_64& rng, bool training) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: p must be in [0,1)");
    Node n;
    n.op = Op::Dropout;
    n.a = a;
    n.value = nodes_[a].value;
    if (training && p > 0.0) {
        n.keep_mask.resize(n.value.v.size());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double inv_keep = 1.0 / (1.0 - p);
        for (size_t i = 0; i < n.value.v.size(); ++i) {
            const double k = (u(rng) < p) ? 0.0 : inv_keep;
            n.keep_mask[i] = k;
            n.value.v[i] *= k;
        }
    }
    return push(std::move(n));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Matrix& av = nodes_[a].value;
    const Matrix& bv = nodes_[b].value;
    if (av.rows != bv.rows)
        throw DimensionError("concat_cols: row mismatch " + shape_str(av) + " vs " +
                             shape_str(bv));
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Matrix(av.rows, av.cols + bv.cols);
    for (int r = 0; r < av.rows; ++r) {
        for (int c = 0; c < av.cols; ++c) n.value.at(r, c) = av.at(r, c);
        for (int c = 0; c < bv.cols; ++c) n.value.at(r, av.cols + c) = bv.at(r, c);
    }
    return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> idx) {
    const Matrix& av = nodes_[a].value;
    Node n;
    n.op = Op::GatherRows;
    n.a = a;
    n.value = Matrix(static_cast<int>(idx.size()), av.cols);
    for (size_t k = 0; k < idx.size(); ++k) {
        const int r = idx[k];
        if (r < 0 || r >= av.rows) throw std::out_of_range("gather_rows: index out of range");
        for (int c = 0; c < av.cols; ++c) n.value.at(static_cast<int>(k), c) = av.at(r, c);
    }
    n.indices = std::move(idx);
    return push(std::move(n));
}

Tape::Id Tape::scatter_add_rows(Id a, std::vector<int> idx, int out_rows) {
    const Matrix& av = nodes_[a].value;
    if (static_cast<int>(idx.size()) != av.rows)
        throw DimensionError("scatter_add_rows: index count != row count");
    Node n;
    n.op = Op::ScatterAddRows;
    n.a = a;
    n.aux = out_rows;
    n.value = Matrix(out_rows, av.cols);
    for (size_t k = 0; k < idx.size(); ++k) {
        const int r = idx[k];
        if (r < 0 || r >= out_rows) throw std::out_of_range("scatter_add_rows: index out of range");
        for (int c = 0; c < av.cols; ++c) n.value.at(r, c) += av.at(static_cast<int>(k), c);
    }
    n.indices = std::move(idx);
    return push(std::move(n));
}

Tape::Id Tape::segment_softmax(Id scores, std::vector<int> segment, int n_segments) {
    const Matrix& sv = nodes_[scores].value;
    if (sv.cols != 1 || static_cast<int>(segment.size()) != sv.rows)
        throw DimensionError("segment_softmax: scores must be Ex1 with one segment per row");
    Node n;
    n.op = Op::SegmentSoftmax;
    n.a = scores;
    n.aux = n_segments;
    n.value = Matrix(sv.rows, 1);
    std::vector<double> seg_max(n_segments, -std::numeric_limits<double>::infinity());
    for (int e = 0; e < sv.rows; ++e)
        seg_max[segment[e]] = std::max(seg_max[segment[e]], sv.v[e]);
    std::vector<double> seg_sum(n_segments, 0.0);
    for (int e = 0; e < sv.rows; ++e) {
        n.value.v[e] = std::exp(sv.v[e] - seg_max[segment[e]]);
        seg_sum[segment[e]] += n.value.v[e];
    }
    for (int e = 0; e < sv.rows; ++e) n.value.v[e] /= seg_sum[segment[e]];
    n.indices = std::move(segment);
    return push(std::move(n));
}

Tape::Id Tape::col_broadcast_mul(Id a, Id coeff) {
    const Matrix& av = nodes_[a].value;
    const Matrix& cv = nodes_[coeff].value;
    if (cv.cols != 1 || cv.rows != av.rows)
        throw DimensionError("col_broadcast_mul: coeff must be Ex1 matching rows");
    Node n;
    n.op = Op::ColBroadcastMul;
    n.a = a;
    n.b = coeff;
    n.value = av;
    for (int r = 0; r < av.rows; ++r)
        for (int c = 0; c < av.cols; ++c) n.value.at(r, c) *= cv.v[r];
    return push(std::move(n));
}

Tape::Id Tape::add_row_broadcast(Id a, Id row) {
    const Matrix& av = nodes_[a].value;
    const Matrix& rv = nodes_[row].value;
    if (rv.rows != 1 || rv.cols != av.cols)
        throw DimensionError("add_row_broadcast: row must be 1xC matching cols");
    Node n;
    n.op = Op::AddRowBroadcast;
    n.a = a;
    n.b = row;
    n.value = av;
    for (int r = 0; r < av.rows; ++r)
        for (int c = 0; c < av.cols; ++c) n.value.at(r, c) += rv.v[c];
    return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.value = Matrix(1, 1);
    for (double x : nodes_[a].value.v) n.value.v[0] += x;
    return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = s;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x *= s;
    return push(std::move(n));
}

void Tape::backward(Id loss) {
    if (nodes_[loss].value.rows != 1 || nodes_[loss].value.cols != 1)
        throw std::invalid_argument("backward: loss must be 1x1, got " +
                                    shape_str(nodes_[loss].value));
    for (Id i = 0; i <= loss; ++i)
        nodes_[i].adjoint = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    nodes_[loss].adjoint.v[0] = 1.0;
    for (Id i = loss; i >= 0; --i) backward_node(i);
}

void Tape::backward_node(Id id) {
    Node& n = nodes_[id];
    const Matrix& g = n.adjoint;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatMul: {
            // dA = g * B^T, dB = A^T * g
            const Matrix& A = nodes_[n.a].value;
            const Matrix& B = nodes_[n.b].value;
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dB = nodes_[n.b].adjoint;
            for (int i = 0; i < A.rows; ++i)
                for (int j = 0; j < B.cols; ++j) {
                    const double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (int k = 0; k < A.cols; ++k) {
                        dA.at(i, k) += gij * B.at(k, j);
                        dB.at(k, j) += A.at(i, k) * gij;
                    }
                }
            break;
        }
        case Op::Add: {
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dB = nodes_[n.b].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) {
                dA.v[i] += g.v[i];
                dB.v[i] += g.v[i];
            }
            break;
        }
        case Op::Sub: {
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dB = nodes_[n.b].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) {
                dA.v[i] += g.v[i];
                dB.v[i] -= g.v[i];
            }
            break;
        }
        case Op::Mul: {
            const Matrix& A = nodes_[n.a].value;
            const Matrix& B = nodes_[n.b].value;
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dB = nodes_[n.b].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) {
                dA.v[i] += g.v[i] * B.v[i];
                dB.v[i] += g.v[i] * A.v[i];
            }
            break;
        }
        case Op::Sigmoid: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) {
                const double y = n.value.v[i];
                dA.v[i] += g.v[i] * y * (1.0 - y);
            }
            break;
        }
        case Op::Tanh: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) {
                const double y = n.value.v[i];
                dA.v[i] += g.v[i] * (1.0 - y * y);
            }
            break;
        }
        case Op::LeakyRelu: {
            const Matrix& A = nodes_[n.a].value;
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i)
                dA.v[i] += g.v[i] * (A.v[i] < 0.0 ? n.scalar : 1.0);
            break;
        }
        case Op::Dropout: {
            Matrix& dA = nodes_[n.a].adjoint;
            if (n.keep_mask.empty()) {
                for (size_t i = 0; i < g.v.size(); ++i) dA.v[i] += g.v[i];
            } else {
                for (size_t i = 0; i < g.v.size(); ++i) dA.v[i] += g.v[i] * n.keep_mask[i];
            }
            break;
        }
        case Op::ConcatCols: {
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dB = nodes_[n.b].adjoint;
            for (int r = 0; r < n.value.rows; ++r) {
                for (int c = 0; c < dA.cols; ++c) dA.at(r, c) += g.at(r, c);
                for (int c = 0; c < dB.cols; ++c) dB.at(r, c) += g.at(r, dA.cols + c);
            }
            break;
        }
        case Op::GatherRows: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t k = 0; k < n.indices.size(); ++k)
                for (int c = 0; c < g.cols; ++c)
                    dA.at(n.indices[k], c) += g.at(static_cast<int>(k), c);
            break;
        }
        case Op::ScatterAddRows: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t k = 0; k < n.indices.size(); ++k)
                for (int c = 0; c < g.cols; ++c)
                    dA.at(static_cast<int>(k), c) += g.at(n.indices[k], c);
            break;
        }
        case Op::SegmentSoftmax: {
            // dscore_e = c_e * (g_e - sum_{f in seg(e)} c_f g_f)
            Matrix& dA = nodes_[n.a].adjoint;
            std::vector<double> seg_dot(n.aux, 0.0);
            for (size_t e = 0; e < n.indices.size(); ++e)
                seg_dot[n.indices[e]] += n.value.v[e] * g.v[e];
            for (size_t e = 0; e < n.indices.size(); ++e)
                dA.v[e] += n.value.v[e] * (g.v[e] - seg_dot[n.indices[e]]);
            break;
        }
        case Op::ColBroadcastMul: {
            const Matrix& A = nodes_[n.a].value;
            const Matrix& C = nodes_[n.b].value;
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dC = nodes_[n.b].adjoint;
            for (int r = 0; r < A.rows; ++r)
                for (int c = 0; c < A.cols; ++c) {
                    dA.at(r, c) += g.at(r, c) * C.v[r];
                    dC.v[r] += g.at(r, c) * A.at(r, c);
                }
            break;
        }
        case Op::AddRowBroadcast: {
            Matrix& dA = nodes_[n.a].adjoint;
            Matrix& dR = nodes_[n.b].adjoint;
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) {
                    dA.at(r, c) += g.at(r, c);
                    dR.v[c] += g.at(r, c);
                }
            break;
        }
        case Op::Sum: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (double& x : dA.v) x += g.v[0];
            break;
        }
        case Op::Scale: {
            Matrix& dA = nodes_[n.a].adjoint;
            for (size_t i = 0; i < g.v.size(); ++i) dA.v[i] += g.v[i] * n.scalar;
            break;
        }
    }
}

double grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                  const Matrix& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

    Tape tape;
    Tape::Id xid = tape.leaf(x, true);
    Tape::Id loss = f(tape, xid);
    tape.backward(loss);
    Matrix analytic = tape.adjoint(xid);

    auto eval = [&](const Matrix& xp) {
        Tape t;
        Tape::Id id = t.leaf(xp, true);
        double v = t.value(f(t, id)).v[0];
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite evaluation");
        return v;
    };

    double worst = 0.0;
    Matrix xp = x;
    for (size_t i = 0; i < x.v.size(); ++i) {
        xp.v[i] = x.v[i] + eps;
        const double fp = eval(xp);
        xp.v[i] = x.v[i] - eps;
        const double fm = eval(xp);
        xp.v[i] = x.v[i];
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic.v[i]), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(analytic.v[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace funs
