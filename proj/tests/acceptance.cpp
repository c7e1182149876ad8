// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
// Criteria 6-8 share one desk-scale sweep and dominate the runtime (~20 min
// on one CPU core); everything else finishes in seconds.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <tuple>
#include <vector>

#include "funs/experiment.hpp"

using namespace funs;

namespace {

int g_failures = 0;

void report(int index, bool ok, const std::string& what, const std::string& detail = "") {
    std::printf("[%d/9] %s  %s%s%s\n", index, ok ? "PASS" : "FAIL", what.c_str(),
                detail.empty() ? "" : "  -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

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

// ---------------------------------------------------------------- criterion 1

// Sum of masked squared errors over a fixed random target, as a plain number.
double funs_loss_value(const FunsNet& net, const std::vector<Matrix>& window,
                       const std::vector<double>& mask, const SensorGraph& g,
                       const std::vector<Matrix>& targets) {
    auto preds = net.predict(window, mask, g);
    double acc = 0.0;
    for (size_t t = 0; t < preds.size(); ++t)
        for (size_t k = 0; k < preds[t].v.size(); ++k) {
            const double diff = preds[t].v[k] - targets[t].v[k];
            acc += diff * diff;
        }
    return acc;
}

double lstm_loss_value(const LstmForecaster& net, const std::vector<Matrix>& window,
                       const SensorGraph& g, const std::vector<Matrix>& targets) {
    auto preds = net.predict(window, {}, g);
    double acc = 0.0;
    for (size_t t = 0; t < preds.size(); ++t)
        for (size_t k = 0; k < preds[t].v.size(); ++k) {
            const double diff = preds[t].v[k] - targets[t].v[k];
            acc += diff * diff;
        }
    return acc;
}

// Analytic parameter gradients of the same loss, via one tape.
template <typename Model>
std::vector<Matrix> analytic_param_grads(const Model& net, const std::vector<Matrix>& window,
                                         const std::vector<double>& mask,
                                         const SensorGraph& g,
                                         const std::vector<Matrix>& targets) {
    Tape tape;
    ParamBinding bind(tape, net.params());
    std::mt19937_64 rng(0);
    auto preds = net.forward_sequence(tape, bind, window, mask, g, false, rng);
    Tape::Id loss = tape.leaf(Matrix(1, 1));
    for (size_t t = 0; t < preds.size(); ++t) {
        Tape::Id diff = tape.sub(preds[t], tape.leaf(targets[t]));
        loss = tape.add(loss, tape.sum(tape.mul(diff, diff)));
    }
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (int p = 0; p < net.params().count(); ++p) grads.push_back(tape.adjoint(bind.id(p)));
    return grads;
}

template <typename Model, typename LossFn>
double max_param_grad_error(Model& net, const std::vector<Matrix>& grads, LossFn loss_fn,
                            double eps = 1e-5) {
    auto probe = [&](Matrix& w, size_t k, double analytic, double step) {
        const double saved = w.v[k];
        w.v[k] = saved + step;
        const double up = loss_fn();
        w.v[k] = saved - step;
        const double down = loss_fn();
        w.v[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        // denominator floored at 1e-3: typical gradients here are O(0.01..1),
        // so entries far below that are held to a 1e-7 absolute bound instead
        // of a meaningless ratio of finite-difference roundoff
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
        return std::abs(numeric - analytic) / denom;
    };
    double worst = 0.0;
    for (int p = 0; p < net.params().count(); ++p) {
        Matrix& w = net.params()[p];
        for (size_t k = 0; k < w.v.size(); ++k) {
            double err = probe(w, k, grads[p].v[k], eps);
            // a difference interval can straddle a leaky_relu kink; shrinking
            // the step resolves those without loosening the tolerance
            if (err > 1e-5) err = std::min(err, probe(w, k, grads[p].v[k], eps / 8.0));
            if (err > 1e-5) err = std::min(err, probe(w, k, grads[p].v[k], eps / 64.0));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    auto g = random_graph(5, 0.4, rng);
    g.labels = random_matrix(5, 1, rng);

    FunsNetConfig cfg;
    cfg.d = 2;
    cfg.h = 3;
    cfg.dropout = 0.0;
    FunsNet net(cfg, 42);
    std::vector<Matrix> window, targets;
    for (int t = 0; t < 6; ++t) {
        window.push_back(random_matrix(5, 2, rng));
        targets.push_back(random_matrix(5, 2, rng));
    }
    const std::vector<double> mask = {1, 1, 0, 1, 0};

    const auto grads = analytic_param_grads(net, window, mask, g, targets);
    const double funs_err = max_param_grad_error(
        net, grads, [&] { return funs_loss_value(net, window, mask, g, targets); });

    LstmForecaster lstm(2, 3, 43);
    const auto lstm_grads = analytic_param_grads(lstm, window, mask, g, targets);
    const double lstm_err = max_param_grad_error(
        lstm, lstm_grads, [&] { return lstm_loss_value(lstm, window, g, targets); });

    // every MPNN layer in isolation, probing input and all four parameters
    double mpnn_err = 0.0;
    {
        ParamSet params;
        auto layer = AttentionLayer::create(params, "l", 3, 2, rng);
        Matrix h = random_matrix(5, 3, rng);
        Matrix weight = random_matrix(5, 2, rng);
        mpnn_err = std::max(mpnn_err, grad_check(
            [&](Tape& t, Tape::Id x) {
                ParamBinding bind(t, params);
                return t.sum(t.mul(layer.forward(t, bind, x, g), t.leaf(weight)));
            },
            h, 1e-5));

        auto layer_loss = [&] {
            Tape t;
            ParamBinding bind(t, params);
            double acc = 0.0;
            const Matrix out = t.value(layer.forward(t, bind, t.leaf(h), g));
            for (size_t k = 0; k < out.v.size(); ++k) acc += out.v[k] * weight.v[k];
            return acc;
        };
        Tape t;
        ParamBinding bind(t, params);
        Tape::Id loss = t.sum(t.mul(layer.forward(t, bind, t.leaf(h), g), t.leaf(weight)));
        t.backward(loss);
        std::vector<Matrix> lg;
        for (int p = 0; p < params.count(); ++p) lg.push_back(t.adjoint(bind.id(p)));
        struct Wrap {
            ParamSet& params_;
            ParamSet& params() { return params_; }
        } wrap{params};
        mpnn_err = std::max(mpnn_err, max_param_grad_error(wrap, lg, layer_loss));
    }

    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    std::ostringstream detail;
    detail << "max rel err funs=" << funs_err << " lstm=" << lstm_err
           << " mpnn=" << mpnn_err << " in " << secs << "s";
    report(1, funs_err < 1e-4 && lstm_err < 1e-4 && mpnn_err < 1e-4 && secs < 60.0,
           "end-to-end gradients match central finite differences", detail.str());
}

// ---------------------------------------------------------------- criterion 2

void criterion_leakage() {
    SyntheticConfig sc;
    sc.n_nodes = 16;
    sc.T = 60;
    sc.seed = 2;
    auto bundle = generate_synthetic(sc);
    const int n = bundle.graph.n;
    auto part = split_nodes(n, 0.5, 99);
    const auto m_in = build_mask(part.v_in, n);
    const auto m_obs = build_mask(part.observed(), n);

    FunsNetConfig cfg;
    cfg.d = 2;
    cfg.z = bundle.graph.labels.cols;
    cfg.h = 4;
    FunsNet net(cfg, 7);

    auto forward_all = [&](const FeatureSequence& source, bool training) {
        const FeatureSequence inputs = apply_mask(source, training ? m_in : m_obs);
        std::vector<Matrix> window;
        for (int t = 0; t < 20; ++t) window.push_back(inputs.step(t));
        Tape tape;
        ParamBinding bind(tape, net.params());
        std::mt19937_64 rng(5);  // fixed dropout stream in training mode
        auto ids = net.forward_sequence(tape, bind, window, training ? m_in : m_obs,
                                        bundle.graph, training, rng);
        std::vector<Matrix> out;
        for (auto id : ids) out.push_back(tape.value(id));
        return out;
    };

    FeatureSequence corrupted = bundle.features;
    for (int t = 0; t < corrupted.T; ++t)
        for (int i : part.v_val) corrupted.at(t, i, 0) += 1e6;
    for (int t = 0; t < corrupted.T; ++t)
        for (int i : part.v_test) corrupted.at(t, i, 1) -= 1e6;

    bool identical = true;
    for (bool training : {false, true}) {
        auto a = forward_all(bundle.features, training);
        auto b = forward_all(corrupted, training);
        for (size_t t = 0; t < a.size(); ++t)
            if (a[t].v != b[t].v) identical = false;
    }

    // NaN targets outside the observed set must never reach the loss
    FeatureSequence poisoned = bundle.features;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int t = 0; t < poisoned.T; ++t)
        for (int i : part.v_val) poisoned.at(t, i, 0) = nan;
    for (int t = 0; t < poisoned.T; ++t)
        for (int i : part.v_test) poisoned.at(t, i, 1) = nan;

    const FeatureSequence train_inputs = apply_mask(poisoned, m_in);
    const FeatureSequence eval_inputs = apply_mask(poisoned, m_obs);
    TrainTask task;
    task.graph = &bundle.graph;
    task.train_inputs = &train_inputs;
    task.targets = &poisoned;
    task.train_input_mask = m_in;
    task.loss_mask = m_obs;
    task.eval_inputs = &eval_inputs;
    task.eval_input_mask = m_obs;
    task.val_mask = build_mask(part.v_opt, n);  // stay on nodes with real data
    task.train_len = 60;
    task.val_begin = 0;
    task.val_end = 60;
    TrainConfig tc;
    tc.window_len = 10;
    tc.epochs = 2;
    tc.windows_per_epoch = 2;
    tc.seed = 3;
    bool finite = true;
    try {
        auto rep = train_model(net, task, tc);
        for (const auto& e : rep.epochs)
            if (!std::isfinite(e.train_loss)) finite = false;
    } catch (const TrainingDiverged&) {
        finite = false;
    }

    report(2, identical && finite,
           "hidden-node corruption changes no output bit; NaN targets keep loss finite");
}

// ---------------------------------------------------------------- criterion 3

Matrix mpnn_reference(const AttentionLayer& layer, const ParamSet& params, const Matrix& h,
                      const SensorGraph& g) {
    const Matrix hs = matmul_plain(h, params[layer.w_src]);
    const Matrix hd = matmul_plain(h, params[layer.w_dst]);
    const Matrix& attn = params[layer.attn];
    const Matrix& bias = params[layer.bias];
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
            for (int c = 0; c < layer.d_out; ++c) out.at(i, c) += c_ji * hs.at(nbrs[k], c);
        }
        for (int c = 0; c < layer.d_out; ++c) out.at(i, c) += bias.at(0, c);
    }
    return out;
}

Matrix knn_reference(const Matrix& x, const std::vector<int>& observed,
                     const SensorGraph& g) {
    // Floyd-Warshall distances over the undirected graph.
    const int n = g.n;
    const int inf = 1 << 20;
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, inf));
    for (int i = 0; i < n; ++i) dist[i][i] = 0;
    for (const auto& [a, b] : g.edges) {
        dist[a][b] = 1;
        dist[b][a] = 1;
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);

    std::vector<char> is_obs(n, 0);
    for (int i : observed) is_obs[i] = 1;
    std::vector<double> global(x.cols, 0.0);
    for (int i : observed)
        for (int f = 0; f < x.cols; ++f) global[f] += x.at(i, f);
    for (double& v : global) v /= static_cast<double>(observed.size());

    Matrix out = x;
    for (int i = 0; i < n; ++i) {
        if (is_obs[i]) continue;
        int best = inf;
        for (int j : observed) best = std::min(best, dist[i][j]);
        if (best >= inf) {
            for (int f = 0; f < x.cols; ++f) out.at(i, f) = global[f];
            continue;
        }
        std::vector<int> donors;
        for (int j : observed)
            if (dist[i][j] == best) donors.push_back(j);
        for (int f = 0; f < x.cols; ++f) {
            double acc = 0.0;
            for (int j : donors) acc += x.at(j, f);
            out.at(i, f) = acc / static_cast<double>(donors.size());
        }
    }
    return out;
}

std::vector<double> dense_solve(Matrix a, std::vector<double> b) {
    const int n = a.rows;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
        for (int c = 0; c < n; ++c) std::swap(a.at(col, c), a.at(pivot, c));
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            for (int c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        for (int c = r + 1; c < n; ++c) b[r] -= a.at(r, c) * b[c];
        b[r] /= a.at(r, r);
    }
    return b;
}

Matrix gpr_reference(const Matrix& x, const std::vector<int>& observed,
                     const SensorGraph& g, const GprConfig& cfg) {
    const int n = g.n;
    double mx = 0, my = 0;
    for (const auto& [a, b] : g.coords) {
        mx += a;
        my += b;
    }
    mx /= n;
    my /= n;
    double sx = 0, sy = 0;
    for (const auto& [a, b] : g.coords) {
        sx += (a - mx) * (a - mx);
        sy += (b - my) * (b - my);
    }
    sx = std::max(std::sqrt(sx / n), 1e-8);
    sy = std::max(std::sqrt(sy / n), 1e-8);
    auto rbf = [&](int a, int b) {
        const double dx = (g.coords[a].first - g.coords[b].first) / sx;
        const double dy = (g.coords[a].second - g.coords[b].second) / sy;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));
    };
    const int no = static_cast<int>(observed.size());
    Matrix k(no, no);
    for (int i = 0; i < no; ++i)
        for (int j = 0; j < no; ++j) k.at(i, j) = rbf(observed[i], observed[j]);
    for (int i = 0; i < no; ++i) k.at(i, i) += cfg.noise;

    std::vector<char> is_obs(n, 0);
    for (int i : observed) is_obs[i] = 1;
    Matrix out = x;
    for (int f = 0; f < x.cols; ++f) {
        std::vector<double> y(no);
        for (int i = 0; i < no; ++i) y[i] = x.at(observed[i], f);
        const auto alpha = dense_solve(k, y);
        for (int q = 0; q < n; ++q) {
            if (is_obs[q]) continue;
            double acc = 0.0;
            for (int j = 0; j < no; ++j) acc += rbf(q, observed[j]) * alpha[j];
            out.at(q, f) = acc;
        }
    }
    return out;
}

void criterion_oracles() {
    std::mt19937_64 rng(3003);
    double worst = 0.0;
    bool ok = true;

    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 6);  // 5..10 nodes
        auto g = random_graph(n, 0.35, rng);
        std::uniform_real_distribution<double> cu(0, 4);
        g.coords.resize(n);
        for (auto& c : g.coords) c = {cu(rng), cu(rng)};
        g.labels = random_matrix(n, 1, rng);

        // mpnn_forward
        {
            ParamSet params;
            auto layer = AttentionLayer::create(params, "l", 3, 2, rng);
            params[layer.bias] = random_matrix(1, 2, rng);
            Matrix h = random_matrix(n, 3, rng);
            Tape tape;
            ParamBinding bind(tape, params);
            const Matrix got = tape.value(layer.forward(tape, bind, tape.leaf(h), g));
            worst = std::max(worst, max_abs_diff(got, mpnn_reference(layer, params, h, g)));
        }

        // knn_predict and gpr_predict
        {
            std::vector<int> observed;
            for (int i = 0; i < n; ++i)
                if (rng() % 2 == 0) observed.push_back(i);
            if (observed.empty()) observed.push_back(0);
            Matrix x = random_matrix(n, 2, rng, 2.0);
            worst = std::max(
                worst, max_abs_diff(knn_predict_step(x, observed, g),
                                    knn_reference(x, observed, g)));
            GprConfig gc;
            gc.noise = 1e-4;
            worst = std::max(
                worst, max_abs_diff(gpr_predict_step(x, observed, g, gc),
                                    gpr_reference(x, observed, g, gc)));
        }

        // training_loss and test_loss against plain-loop replicas
        {
            const int T = 24;
            FeatureSequence x(T, n, 2);
            std::uniform_real_distribution<double> u(-1, 1);
            for (double& v : x.values) v = u(rng);
            FunsNetConfig mc;
            mc.d = 2;
            mc.h = 3;
            mc.dropout = 0.0;
            FunsNet model(mc, rng());

            std::vector<double> m_in(n, 0.0), m_obs(n, 0.0), m_val(n, 0.0);
            for (int i = 0; i < n; ++i) m_obs[i] = (i % 2 == 0) ? 1.0 : 0.0;
            m_in = m_obs;
            m_in[0] = 0.0;  // v_opt node
            m_val[1] = 1.0;
            if (n > 3) m_val[3] = 1.0;

            const FeatureSequence train_inputs = apply_mask(x, m_in);
            const FeatureSequence eval_inputs = apply_mask(x, m_obs);
            const int horizon = 1;

            TrainTask task;
            task.graph = &g;
            task.train_inputs = &train_inputs;
            task.targets = &x;
            task.train_input_mask = m_in;
            task.loss_mask = m_obs;
            task.eval_inputs = &eval_inputs;
            task.eval_input_mask = m_obs;
            task.val_mask = m_val;
            task.train_len = 16;
            task.val_begin = 16;
            task.val_end = 20;

            TrainConfig tc;
            tc.horizon = horizon;
            tc.window_len = 6;
            tc.epochs = 1;
            tc.windows_per_epoch = 1;
            tc.learning_rate = 0.0;
            tc.seed = rng();
            const auto rep = train_model(model, task, tc);

            // replicate the single window by hand
            std::mt19937_64 wrng(tc.seed);
            const int start = sample_window_start(16, 6, horizon, wrng);
            std::vector<Matrix> window;
            for (int t = start; t < start + 6; ++t) window.push_back(train_inputs.step(t));
            const auto preds = model.predict(window, m_in, g);
            int loss_nodes = 0;
            for (double m : m_obs)
                if (m != 0.0) ++loss_nodes;
            double acc = 0.0;
            for (int k = 0; k < 6; ++k)
                for (int i = 0; i < n; ++i) {
                    if (m_obs[i] == 0.0) continue;
                    for (int f = 0; f < 2; ++f) {
                        const double diff =
                            preds[k].at(i, f) - x.at(start + k + horizon, i, f);
                        acc += diff * diff;
                    }
                }
            const double expect_loss = acc / (6.0 * loss_nodes * 2.0);
            worst = std::max(worst, std::abs(rep.epochs[0].train_loss - expect_loss));

            // test loss on the validation split, same alignment rules
            const double got_val = evaluate_model(model, g, eval_inputs, m_obs, x, m_val,
                                                  horizon, 16, 20);
            std::vector<Matrix> full;
            for (int t = 0; t < 20 - horizon; ++t) full.push_back(eval_inputs.step(t));
            const auto fp = model.predict(full, m_obs, g);
            double vacc = 0.0;
            size_t vcount = 0;
            for (int w = 0; w < 20 - horizon; ++w) {
                const int target = w + horizon;
                if (target < 16 || target >= 20) continue;
                for (int i = 0; i < n; ++i) {
                    if (m_val[i] == 0.0) continue;
                    for (int f = 0; f < 2; ++f) {
                        const double diff = fp[w].at(i, f) - x.at(target, i, f);
                        vacc += diff * diff;
                        ++vcount;
                    }
                }
            }
            worst = std::max(worst, std::abs(got_val - vacc / vcount));
        }
    }

    ok = worst < 1e-8;
    std::ostringstream detail;
    detail << "max abs deviation " << worst << " over 20 instances";
    report(3, ok, "forward/loss/knn/gpr match brute-force oracles", detail.str());
}

// ---------------------------------------------------------------- criterion 4

void criterion_gate_identities() {
    std::mt19937_64 rng(4004);
    FunsNetConfig cfg;
    cfg.d = 2;
    cfg.h = 3;
    cfg.dropout = 0.0;
    FunsNet net(cfg, 11);
    auto g = random_graph(6, 0.4, rng);
    Matrix f = random_matrix(6, cfg.d + cfg.static_width(), rng);
    Matrix h_prev = random_matrix(6, cfg.h, rng);

    auto& p = net.params();
    bool layout_ok = p.name(12) == "gate_u.w_src" && p.name(15) == "gate_u.bias" &&
                     p.name(8) == "gate_r.w_src" && p.name(16) == "gate_c.w_src";
    // silence the update-gate MPNN so the bias alone sets U
    p[12] = Matrix(p[12].rows, p[12].cols);
    p[13] = Matrix(p[13].rows, p[13].cols);
    p[14] = Matrix(p[14].rows, p[14].cols);

    auto step = [&] {
        Tape tape;
        ParamBinding bind(tape, p);
        std::mt19937_64 r(0);
        return tape.value(
            net.gru_step(tape, bind, tape.leaf(f), tape.leaf(h_prev), g, false, r));
    };

    // sigmoid(1000) == 1.0 and sigmoid(-1000) == 0.0 exactly in doubles
    p[15] = Matrix::constant(1, cfg.h, 1000.0);
    const bool keep_ok = step().v == h_prev.v;

    p[15] = Matrix::constant(1, cfg.h, -1000.0);
    const Matrix h_new = step();
    Tape ref;
    ParamBinding rbind(ref, p);
    AttentionLayer gate_r{cfg.d + cfg.static_width() + cfg.h, cfg.h, cfg.leaky_slope,
                          8, 9, 10, 11};
    AttentionLayer gate_c{cfg.d + cfg.static_width() + cfg.h, cfg.h, cfg.leaky_slope,
                          16, 17, 18, 19};
    auto fid = ref.leaf(f);
    auto hid = ref.leaf(h_prev);
    auto r = ref.sigmoid(gate_r.forward(ref, rbind, ref.concat_cols(fid, hid), g));
    auto c = ref.tanh(gate_c.forward(ref, rbind, ref.concat_cols(fid, ref.mul(r, hid)), g));
    const bool cand_ok = h_new.v == ref.value(c).v;

    report(4, layout_ok && keep_ok && cand_ok,
           "saturated update gate reproduces H(t-1) and C(t) bit for bit");
}

// ------------------------------------------------------- criteria 5 through 9

struct SweepKey {
    std::string model;
    double share;
    int horizon;
    bool operator<(const SweepKey& o) const {
        return std::tie(model, share, horizon) < std::tie(o.model, o.share, o.horizon);
    }
};

double seed_mean(const std::map<SweepKey, std::vector<double>>& acc, const std::string& model,
                 double share, int horizon) {
    const auto it = acc.find({model, share, horizon});
    if (it == acc.end() || it->second.empty())
        throw std::runtime_error("missing sweep cell " + model);
    double m = 0.0;
    for (double v : it->second) m += v;
    return m / it->second.size();
}

}  // namespace

int main(int argc, char** argv) {
    std::printf("funs acceptance suite\n");
    criterion_gradients();
    criterion_leakage();
    criterion_oracles();
    criterion_gate_identities();

    // --local: skip the desk-scale sweep (criteria 5-9) for quick iteration
    if (argc > 1 && std::string(argv[1]) == "--local")
        return g_failures == 0 ? 0 : 1;

    // shared desk-scale sweep for criteria 5-8
    const auto sweep_t0 = std::chrono::steady_clock::now();
    SyntheticConfig sc;  // defaults: n=150, T=294
    auto bundle = generate_synthetic(sc);
    ExperimentConfig cfg;
    cfg.synthetic = sc;
    const std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};

    std::map<SweepKey, std::vector<double>> acc;
    auto run = [&](ModelKind kind, double share, int horizon, uint64_t seed) {
        const ResultRow row = run_cell(bundle, cfg, kind, share, horizon, seed);
        if (row.failed || !std::isfinite(row.test_mse))
            throw std::runtime_error("sweep cell failed: " + row.to_csv());
        acc[{row.model, share, horizon}].push_back(row.test_mse);
        std::fprintf(stderr, "sweep %s\n", row.to_csv().c_str());
    };

    try {
        // criterion 5: mean predictor calibration
        for (double share : {0.9, 0.5, 0.1})
            for (uint64_t seed : seeds) run(ModelKind::Mean, share, 0, seed);
        bool c5 = true;
        std::vector<double> mean_mses;
        for (double share : {0.9, 0.5, 0.1}) {
            const double m = seed_mean(acc, "mean", share, 0);
            mean_mses.push_back(m);
            if (m < 0.8 || m > 1.2) c5 = false;
        }
        const double center =
            (mean_mses[0] + mean_mses[1] + mean_mses[2]) / 3.0;
        std::ostringstream c5_detail;
        c5_detail << "mean mse @0.9/0.5/0.1 = " << mean_mses[0] << "/" << mean_mses[1]
                  << "/" << mean_mses[2];
        for (double m : mean_mses)
            if (std::abs(m - center) > 0.1 * center) c5 = false;
        report(5, c5, "mean predictor is calibrated and flat across shares",
               c5_detail.str());

        // criterion 6: trend reproduction
        for (double share : {0.7, 0.5, 0.3})
            for (int horizon : {0, 12})
                for (uint64_t seed : seeds) {
                    run(ModelKind::FunsN, share, horizon, seed);
                    run(ModelKind::FunsNNoLabels, share, horizon, seed);
                    run(ModelKind::Mean, share, horizon, seed);
                    run(horizon == 0 ? ModelKind::Knn : ModelKind::KnnLstm, share, horizon,
                        seed);
                }
        bool c6 = true;
        std::ostringstream c6_detail;
        for (double share : {0.7, 0.5, 0.3})
            for (int horizon : {0, 12}) {
                const double funs = seed_mean(acc, "funs_n", share, horizon);
                const double nolab = seed_mean(acc, "funs_n_no_labels", share, horizon);
                const double mean_mse = seed_mean(acc, "mean", share, horizon);
                const double knn_mse =
                    seed_mean(acc, horizon == 0 ? "knn" : "knn_lstm", share, horizon);
                if (!(funs < knn_mse && knn_mse < mean_mse && funs < nolab)) c6 = false;
                c6_detail << " [s=" << share << ",t=" << horizon << " funs=" << funs
                          << " nolab=" << nolab << " knn=" << knn_mse
                          << " mean=" << mean_mse << "]";
            }
        const double sweep_hours =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - sweep_t0)
                .count() /
            3600.0;
        c6 = c6 && sweep_hours < 2.0;
        report(6, c6, "FUNS-N < kNN(+LSTM) < mean and labels < no-labels",
               c6_detail.str());

        // criterion 7: all-observed lower bound
        for (double share : {0.7, 0.5, 0.3})
            for (uint64_t seed : seeds) run(ModelKind::AllObservedBound, share, 0, seed);
        bool c7 = true;
        std::ostringstream c7_detail;
        for (double share : {0.7, 0.5, 0.3}) {
            const double bound = seed_mean(acc, "all_observed_bound", share, 0);
            const double masked = seed_mean(acc, "funs_n", share, 0);
            if (!(bound <= masked)) c7 = false;
            c7_detail << " [s=" << share << " bound=" << bound << " masked=" << masked
                      << "]";
        }
        report(7, c7, "all-observed FUNS-N bounds masked FUNS-N from below",
               c7_detail.str());

        // criterion 8: share monotonicity endpoints
        for (double share : {0.9, 0.1})
            for (uint64_t seed : seeds) run(ModelKind::FunsN, share, 0, seed);
        const double high = seed_mean(acc, "funs_n", 0.9, 0);
        const double low = seed_mean(acc, "funs_n", 0.1, 0);
        std::ostringstream c8_detail;
        c8_detail << "mse @0.9=" << high << " @0.1=" << low;
        report(8, high <= low, "FUNS-N degrades as the observed share shrinks",
               c8_detail.str());

        // criterion 9: per-cell determinism (metric fields; wall time excluded)
        auto strip_wall = [](const ResultRow& r) {
            const std::string s = r.to_csv();
            return s.substr(0, s.rfind(','));
        };
        bool c9 = true;
        for (ModelKind kind : {ModelKind::Mean, ModelKind::Knn, ModelKind::FunsN}) {
            const auto a = run_cell(bundle, cfg, kind, 0.5, 0, 3);
            const auto b = run_cell(bundle, cfg, kind, 0.5, 0, 3);
            if (strip_wall(a) != strip_wall(b)) c9 = false;
        }
        report(9, c9, "repeated cells emit byte-identical result rows");
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }

    std::printf("%s (%d criteria failed)\n", g_failures == 0 ? "ACCEPTED" : "REJECTED",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
