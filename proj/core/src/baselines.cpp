#include "funs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace funs {

std::vector<double> feature_mean(const FeatureSequence& x, const std::vector<double>& node_mask,
                                 int t_begin, int t_end) {
    std::vector<double> mean(x.d, 0.0);
    size_t count = 0;
    for (int t = t_begin; t < t_end; ++t)
        for (int i = 0; i < x.n; ++i) {
            if (node_mask[i] == 0.0) continue;
            for (int f = 0; f < x.d; ++f) mean[f] += x.at(t, i, f);
            ++count;
        }
    if (count == 0) throw std::invalid_argument("feature_mean: no training observations");
    for (double& m : mean) m /= static_cast<double>(count);
    return mean;
}

FeatureSequence mean_predict(const std::vector<double>& train_mean, int T, int n) {
    FeatureSequence out(T, n, static_cast<int>(train_mean.size()));
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i)
            for (size_t f = 0; f < train_mean.size(); ++f)
                out.at(t, i, static_cast<int>(f)) = train_mean[f];
    return out;
}

std::vector<std::vector<int>> knn_donor_sets(const SensorGraph& graph,
                                             const std::vector<int>& observed) {
    if (observed.empty()) throw std::invalid_argument("knn_donor_sets: no observed nodes");
    std::vector<char> is_obs(graph.n, 0);
    for (int i : observed) is_obs[i] = 1;

    std::vector<std::vector<int>> undirected(graph.n);
    for (const auto& [s, d] : graph.edges) {
        undirected[s].push_back(d);
        undirected[d].push_back(s);
    }

    std::vector<std::vector<int>> donors(graph.n);
    std::vector<int> dist(graph.n);
    for (int start = 0; start < graph.n; ++start) {
        if (is_obs[start]) {
            donors[start] = {start};
            continue;
        }
        // BFS until the first level containing observed nodes; all observed
        // nodes at that level are donors (ties averaged by the caller).
        std::fill(dist.begin(), dist.end(), -1);
        dist[start] = 0;
        std::deque<int> queue{start};
        int found_level = -1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            if (found_level >= 0 && dist[u] >= found_level) break;
            for (int v : undirected[u]) {
                if (dist[v] >= 0) continue;
                dist[v] = dist[u] + 1;
                if (is_obs[v]) {
                    if (found_level < 0) found_level = dist[v];
                    if (dist[v] == found_level) donors[start].push_back(v);
                } else {
                    queue.push_back(v);
                }
            }
        }
        std::sort(donors[start].begin(), donors[start].end());
    }
    return donors;
}

namespace {

Matrix knn_from_donors(const Matrix& x_t, const std::vector<int>& observed,
                       const std::vector<std::vector<int>>& donors) {
    Matrix out = x_t;
    std::vector<double> global_mean(x_t.cols, 0.0);
    for (int i : observed)
        for (int f = 0; f < x_t.cols; ++f) global_mean[f] += x_t.at(i, f);
    for (double& g : global_mean) g /= static_cast<double>(observed.size());

    std::vector<char> is_obs(x_t.rows, 0);
    for (int i : observed) is_obs[i] = 1;

    for (int i = 0; i < x_t.rows; ++i) {
        if (is_obs[i]) continue;
        if (donors[i].empty()) {
            for (int f = 0; f < x_t.cols; ++f) out.at(i, f) = global_mean[f];
            continue;
        }
        for (int f = 0; f < x_t.cols; ++f) {
            double acc = 0.0;
            for (int j : donors[i]) acc += x_t.at(j, f);
            out.at(i, f) = acc / static_cast<double>(donors[i].size());
        }
    }
    return out;
}

}  // namespace

Matrix knn_predict_step(const Matrix& x_t, const std::vector<int>& observed,
                        const SensorGraph& graph) {
    return knn_from_donors(x_t, observed, knn_donor_sets(graph, observed));
}

FeatureSequence impute_knn(const FeatureSequence& x, const std::vector<int>& observed,
                           const SensorGraph& graph) {
    const auto donors = knn_donor_sets(graph, observed);
    FeatureSequence out = x;
    for (int t = 0; t < x.T; ++t) {
        Matrix filled = knn_from_donors(x.step(t), observed, donors);
        for (int i = 0; i < x.n; ++i)
            for (int f = 0; f < x.d; ++f) out.at(t, i, f) = filled.at(i, f);
    }
    return out;
}

namespace {

// Lower-triangular Cholesky; throws on non-positive pivot.
Matrix cholesky(const Matrix& a) {
    const int n = a.rows;
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a.at(i, j);
            for (int k = 0; k < j; ++k) sum -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (sum <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                l.at(i, i) = std::sqrt(sum);
            } else {
                l.at(i, j) = sum / l.at(j, j);
            }
        }
    }
    return l;
}

std::vector<double> chol_solve(const Matrix& l, std::vector<double> y) {
    const int n = l.rows;
    for (int i = 0; i < n; ++i) {  // L z = y
        for (int k = 0; k < i; ++k) y[i] -= l.at(i, k) * y[k];
        y[i] /= l.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {  // L^T x = z
        for (int k = i + 1; k < n; ++k) y[i] -= l.at(k, i) * y[k];
        y[i] /= l.at(i, i);
    }
    return y;
}

std::vector<std::pair<double, double>> zscore_coords(
    const std::vector<std::pair<double, double>>& coords) {
    double mx = 0, my = 0;
    for (const auto& [x, y] : coords) {
        mx += x;
        my += y;
    }
    mx /= coords.size();
    my /= coords.size();
    double sx = 0, sy = 0;
    for (const auto& [x, y] : coords) {
        sx += (x - mx) * (x - mx);
        sy += (y - my) * (y - my);
    }
    sx = std::max(std::sqrt(sx / coords.size()), 1e-8);
    sy = std::max(std::sqrt(sy / coords.size()), 1e-8);
    std::vector<std::pair<double, double>> out(coords.size());
    for (size_t i = 0; i < coords.size(); ++i)
        out[i] = {(coords[i].first - mx) / sx, (coords[i].second - my) / sy};
    return out;
}

}  // namespace

GprImputer::GprImputer(const SensorGraph& graph, const std::vector<int>& observed, GprConfig cfg) {
    cfg.validate();
    if (!graph.has_coords())
        throw std::invalid_argument("GprImputer: graph has no coordinates");
    if (observed.empty()) throw std::invalid_argument("GprImputer: no observed nodes");
    n_ = graph.n;
    observed_ = observed;
    std::vector<char> is_obs(graph.n, 0);
    for (int i : observed) is_obs[i] = 1;
    for (int i = 0; i < graph.n; ++i)
        if (!is_obs[i]) query_.push_back(i);

    const auto zc = zscore_coords(graph.coords);
    auto rbf = [&](int a, int b) {
        const double dx = zc[a].first - zc[b].first;
        const double dy = zc[a].second - zc[b].second;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));
    };

    const int no = static_cast<int>(observed_.size());
    Matrix k(no, no);
    for (int i = 0; i < no; ++i)
        for (int j = 0; j < no; ++j) k.at(i, j) = rbf(observed_[i], observed_[j]);

    double jitter = cfg.noise;
    for (int attempt = 0;; ++attempt) {
        Matrix kj = k;
        for (int i = 0; i < no; ++i) kj.at(i, i) += jitter;
        try {
            chol_ = cholesky(kj);
            break;
        } catch (const std::runtime_error&) {
            if (attempt >= 1)
                throw std::runtime_error(
                    "GprImputer: kernel matrix not positive definite even with jitter " +
                    std::to_string(jitter));
            jitter = std::max(jitter * 10.0, 1e-6);
        }
    }

    cross_ = Matrix(static_cast<int>(query_.size()), no);
    for (size_t q = 0; q < query_.size(); ++q)
        for (int j = 0; j < no; ++j)
            cross_.at(static_cast<int>(q), j) = rbf(query_[q], observed_[j]);
}

Matrix GprImputer::predict_step(const Matrix& x_t) const {
    Matrix out = x_t;
    const int no = static_cast<int>(observed_.size());
    for (int f = 0; f < x_t.cols; ++f) {
        std::vector<double> y(no);
        for (int i = 0; i < no; ++i) y[i] = x_t.at(observed_[i], f);
        const std::vector<double> alpha = chol_solve(chol_, std::move(y));
        for (size_t q = 0; q < query_.size(); ++q) {
            double acc = 0.0;
            for (int j = 0; j < no; ++j)
                acc += cross_.at(static_cast<int>(q), j) * alpha[j];
            out.at(query_[q], f) = acc;
        }
    }
    return out;
}

FeatureSequence GprImputer::impute(const FeatureSequence& x) const {
    FeatureSequence out = x;
    for (int t = 0; t < x.T; ++t) {
        Matrix filled = predict_step(x.step(t));
        for (int i = 0; i < x.n; ++i)
            for (int f = 0; f < x.d; ++f) out.at(t, i, f) = filled.at(i, f);
    }
    return out;
}

Matrix gpr_predict_step(const Matrix& x_t, const std::vector<int>& observed,
                        const SensorGraph& graph, const GprConfig& cfg) {
    return GprImputer(graph, observed, cfg).predict_step(x_t);
}

LstmForecaster::Gate LstmForecaster::make_gate(const std::string& name, std::mt19937_64& rng) {
    const double bx = 1.0 / std::sqrt(static_cast<double>(d_));
    const double bh = 1.0 / std::sqrt(static_cast<double>(h_));
    Gate g;
    g.w_x = params_.add(name + ".w_x", uniform_init(d_, h_, bx, rng));
    g.w_h = params_.add(name + ".w_h", uniform_init(h_, h_, bh, rng));
    g.b = params_.add(name + ".b", Matrix(1, h_));
    return g;
}

LstmForecaster::LstmForecaster(int d, int hidden, uint64_t init_seed) : d_(d), h_(hidden) {
    std::mt19937_64 rng(init_seed);
    in_ = make_gate("lstm.in", rng);
    forget_ = make_gate("lstm.forget", rng);
    out_ = make_gate("lstm.out", rng);
    cand_ = make_gate("lstm.cand", rng);
    const double bh = 1.0 / std::sqrt(static_cast<double>(h_));
    w_y_ = params_.add("readout.w", uniform_init(h_, d_, bh, rng));
    b_y_ = params_.add("readout.b", Matrix(1, d_));
}

std::vector<Tape::Id> LstmForecaster::forward_sequence(Tape& tape, const ParamBinding& bind,
                                                       const std::vector<Matrix>& window,
                                                       const std::vector<double>&,
                                                       const SensorGraph&, bool,
                                                       std::mt19937_64&) const {
    if (window.empty()) throw std::invalid_argument("LstmForecaster: empty window");
    const int n = window.front().rows;

    auto gate_pre = [&](const Gate& g, Tape::Id x, Tape::Id h) {
        return tape.add_row_broadcast(
            tape.add(tape.matmul(x, bind.id(g.w_x)), tape.matmul(h, bind.id(g.w_h))),
            bind.id(g.b));
    };

    Tape::Id h = tape.leaf(Matrix(n, h_));
    Tape::Id c = tape.leaf(Matrix(n, h_));
    std::vector<Tape::Id> preds;
    preds.reserve(window.size());
    for (const Matrix& x_raw : window) {
        Tape::Id x = tape.leaf(x_raw);
        Tape::Id i_g = tape.sigmoid(gate_pre(in_, x, h));
        Tape::Id f_g = tape.sigmoid(gate_pre(forget_, x, h));
        Tape::Id o_g = tape.sigmoid(gate_pre(out_, x, h));
        Tape::Id g_g = tape.tanh(gate_pre(cand_, x, h));
        c = tape.add(tape.mul(f_g, c), tape.mul(i_g, g_g));
        h = tape.mul(o_g, tape.tanh(c));
        preds.push_back(tape.add_row_broadcast(tape.matmul(h, bind.id(w_y_)), bind.id(b_y_)));
    }
    return preds;
}

PipelineResult impute_then_forecast(Imputer method, const SensorGraph& graph,
                                    const FeatureSequence& x, const NodePartition& part,
                                    const TrainConfig& cfg, int lstm_hidden,
                                    const GprConfig& gpr_cfg, int val_begin, int val_end,
                                    int test_begin, int test_end) {
    const auto observed = part.observed();
    const auto m_obs = build_mask(observed, x.n);
    const auto m_in = build_mask(part.v_in, x.n);
    const auto m_val = build_mask(part.v_val, x.n);
    const auto m_test = build_mask(part.v_test, x.n);

    // Only actually-available observations may feed the imputer.
    const FeatureSequence train_visible = apply_mask(x, m_in);
    const FeatureSequence eval_visible = apply_mask(x, m_obs);

    FeatureSequence train_inputs, eval_inputs;
    if (method == Imputer::Knn) {
        train_inputs = impute_knn(train_visible, part.v_in, graph);
        eval_inputs = impute_knn(eval_visible, observed, graph);
    } else {
        train_inputs = GprImputer(graph, part.v_in, gpr_cfg).impute(train_visible);
        eval_inputs = GprImputer(graph, observed, gpr_cfg).impute(eval_visible);
    }

    LstmForecaster model(x.d, lstm_hidden, cfg.seed);

    TrainTask task;
    task.graph = &graph;
    task.train_inputs = &train_inputs;
    task.targets = &x;
    task.train_input_mask = m_in;
    task.loss_mask = m_obs;
    task.eval_inputs = &eval_inputs;
    task.eval_input_mask = m_obs;
    task.val_mask = m_val;
    task.train_len = cfg.horizon == 0 ? x.T : val_begin;
    task.val_begin = val_begin;
    task.val_end = val_end;

    PipelineResult res;
    res.report = train_model(model, task, cfg);
    res.val_mse = res.report.best_val_mse;
    res.test_mse = evaluate_model(model, graph, eval_inputs, m_obs, x, m_test, cfg.horizon,
                                  test_begin, test_end);
    return res;
}

}  // namespace funs
