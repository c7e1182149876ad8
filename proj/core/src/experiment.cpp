#include "funs/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace funs {

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::FunsN: return "funs_n";
        case ModelKind::FunsNNoLabels: return "funs_n_no_labels";
        case ModelKind::Mean: return "mean";
        case ModelKind::Knn: return "knn";
        case ModelKind::Gpr: return "gpr";
        case ModelKind::KnnLstm: return "knn_lstm";
        case ModelKind::GprLstm: return "gpr_lstm";
        case ModelKind::AllObservedBound: return "all_observed_bound";
    }
    throw std::logic_error("model_name: unknown kind");
}

ModelKind model_from_name(const std::string& name) {
    static const std::map<std::string, ModelKind> table = {
        {"funs_n", ModelKind::FunsN},
        {"funs_n_no_labels", ModelKind::FunsNNoLabels},
        {"mean", ModelKind::Mean},
        {"knn", ModelKind::Knn},
        {"gpr", ModelKind::Gpr},
        {"knn_lstm", ModelKind::KnnLstm},
        {"gpr_lstm", ModelKind::GprLstm},
        {"all_observed_bound", ModelKind::AllObservedBound},
    };
    auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown model: " + name);
    return it->second;
}

void ExperimentConfig::validate() const {
    if (!synthetic && values_path.empty())
        throw std::invalid_argument("ExperimentConfig: no dataset given");
    if (!synthetic && delta <= 0.0 && !edges_path)
        throw std::invalid_argument("ExperimentConfig: CSV datasets need delta or an edges file");
    for (double s : shares)
        if (s <= 0.0 || s >= 1.0)
            throw std::invalid_argument("ExperimentConfig: shares must be in (0,1)");
    if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: need at least one seed");
    if (roster.empty()) throw std::invalid_argument("ExperimentConfig: empty roster");
    for (int h : horizons)
        if (h < 0) throw std::invalid_argument("ExperimentConfig: horizons must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    nlohmann::json j;
    is >> j;

    ExperimentConfig cfg;
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        SyntheticConfig sc;
        sc.n_nodes = s.value("n_nodes", sc.n_nodes);
        sc.T = s.value("T", sc.T);
        sc.road_types = s.value("road_types", sc.road_types);
        sc.diffusion = s.value("diffusion", sc.diffusion);
        sc.cycle_period = s.value("cycle_period", sc.cycle_period);
        sc.cycle_amplitude = s.value("cycle_amplitude", sc.cycle_amplitude);
        sc.noise = s.value("noise", sc.noise);
        sc.seed = s.value("seed", sc.seed);
        cfg.synthetic = sc;
    }
    if (j.contains("csv")) {
        const auto& c = j["csv"];
        cfg.values_path = c.at("values").get<std::string>();
        cfg.coords_path = c.at("coords").get<std::string>();
        if (c.contains("labels")) cfg.labels_path = c["labels"].get<std::string>();
        if (c.contains("edges")) cfg.edges_path = c["edges"].get<std::string>();
        cfg.delta = c.value("delta", 0.0);
    }
    if (j.contains("shares")) cfg.shares = j["shares"].get<std::vector<double>>();
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (j.contains("horizons")) cfg.horizons = j["horizons"].get<std::vector<int>>();
    if (j.contains("roster")) {
        cfg.roster.clear();
        for (const auto& name : j["roster"]) cfg.roster.push_back(model_from_name(name));
    }
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.dropout = j.value("dropout", cfg.dropout);
    if (j.contains("gpr")) {
        cfg.gpr.sigma = j["gpr"].value("sigma", cfg.gpr.sigma);
        cfg.gpr.noise = j["gpr"].value("noise", cfg.gpr.noise);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.window_len = t.value("window_len", cfg.train.window_len);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.windows_per_epoch = t.value("windows_per_epoch", cfg.train.windows_per_epoch);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.val_every = t.value("val_every", cfg.train.val_every);
    }
    cfg.train_frac = j.value("train_frac", cfg.train_frac);
    cfg.val_frac = j.value("val_frac", cfg.val_frac);
    cfg.cell_budget_ms = j.value("cell_budget_ms", cfg.cell_budget_ms);
    cfg.output_path = j.value("output", cfg.output_path);
    cfg.validate();
    return cfg;
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string fmt_mse(double x) {
    if (!std::isfinite(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

}  // namespace

uint64_t partition_seed(uint64_t base_seed, double share) {
    const uint64_t share_key = static_cast<uint64_t>(std::llround(share * 1000.0));
    return splitmix64(splitmix64(base_seed) ^ share_key);
}

uint64_t cell_seed(uint64_t base_seed, double share, int horizon, ModelKind kind) {
    const uint64_t share_key = static_cast<uint64_t>(std::llround(share * 1000.0));
    uint64_t s = splitmix64(base_seed);
    s = splitmix64(s ^ share_key);
    s = splitmix64(s ^ static_cast<uint64_t>(horizon + 1));
    // funs_n and funs_n_no_labels share one seed so they differ only in L.
    const ModelKind seed_kind = kind == ModelKind::FunsNNoLabels ? ModelKind::FunsN : kind;
    s = splitmix64(s ^ static_cast<uint64_t>(seed_kind));
    return s;
}

std::string ResultRow::to_csv() const {
    std::ostringstream os;
    char share_buf[16];
    std::snprintf(share_buf, sizeof(share_buf), "%.3f", share);
    os << model << "," << share_buf << "," << horizon << "," << seed << ","
       << fmt_mse(val_mse) << "," << fmt_mse(test_mse) << "," << wall_ms;
    return os.str();
}

DatasetBundle load_dataset(const ExperimentConfig& cfg) {
    if (cfg.synthetic) return generate_synthetic(*cfg.synthetic);
    return load_csv_dataset(cfg.values_path, cfg.coords_path, cfg.labels_path, cfg.delta,
                            cfg.edges_path);
}

namespace {

struct CellContext {
    NodePartition part;
    FeatureSequence normalized;
    std::vector<double> m_in, m_obs, m_val, m_test;
    int train_len = 0;   // P (or T when horizon == 0)
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
};

CellContext make_context(const DatasetBundle& bundle, const ExperimentConfig& cfg,
                         double share, int horizon, uint64_t seed) {
    const int n = bundle.graph.n;
    const int T = bundle.features.T;
    CellContext ctx;
    ctx.part = split_nodes(n, share, partition_seed(seed, share));
    ctx.m_in = build_mask(ctx.part.v_in, n);
    ctx.m_obs = build_mask(ctx.part.observed(), n);
    ctx.m_val = build_mask(ctx.part.v_val, n);
    ctx.m_test = build_mask(ctx.part.v_test, n);

    if (horizon == 0) {
        // Node-only split: no temporal separation.
        ctx.train_len = T;
        ctx.val_begin = 0;
        ctx.val_end = T;
        ctx.test_begin = 0;
        ctx.test_end = T;
    } else {
        TimeSplit split;
        split.P = static_cast<int>(std::lround(cfg.train_frac * T));
        split.Q = static_cast<int>(std::lround(cfg.val_frac * T));
        split.T = T;
        split.validate();
        ctx.train_len = split.P;
        ctx.val_begin = split.P;
        ctx.val_end = split.Q;
        ctx.test_begin = split.Q;
        ctx.test_end = T;
    }

    const NormStats stats =
        compute_stats(bundle.features, ctx.m_obs, 0, ctx.train_len);
    ctx.normalized = normalize(bundle.features, stats);
    return ctx;
}

TrainConfig cell_train_config(const ExperimentConfig& cfg, int horizon, uint64_t seed) {
    TrainConfig t = cfg.train;
    t.horizon = horizon;
    t.seed = seed;
    t.time_budget_ms = cfg.cell_budget_ms;
    return t;
}

double imputer_eval(const FeatureSequence& imputed, const FeatureSequence& truth,
                    const std::vector<double>& node_mask, int horizon, int begin, int end) {
    std::vector<Matrix> preds, targets;
    for (int tau = std::max(begin, horizon); tau < end; ++tau) {
        preds.push_back(imputed.step(tau - horizon));
        targets.push_back(truth.step(tau));
    }
    if (preds.empty()) throw std::invalid_argument("imputer_eval: empty scoring range");
    return masked_mse(preds, targets, node_mask);
}

void run_funs_cell(const DatasetBundle& bundle, const ExperimentConfig& cfg, ModelKind kind,
                   const CellContext& ctx, const TrainConfig& tcfg, ResultRow& row) {
    SensorGraph graph = bundle.graph;
    if (kind == ModelKind::FunsNNoLabels) graph.labels = Matrix::ones(graph.n, 1);

    FunsNetConfig mc;
    mc.d = bundle.features.d;
    mc.z = graph.labels.cols;
    mc.h = cfg.hidden;
    mc.dropout = cfg.dropout;
    FunsNet model(mc, tcfg.seed);

    const bool all_observed = kind == ModelKind::AllObservedBound;
    const std::vector<double> train_mask =
        all_observed ? std::vector<double>(graph.n, 1.0) : ctx.m_in;
    const std::vector<double> loss_mask =
        all_observed ? std::vector<double>(graph.n, 1.0) : ctx.m_obs;
    const std::vector<double> eval_mask =
        all_observed ? std::vector<double>(graph.n, 1.0) : ctx.m_obs;

    const FeatureSequence train_inputs = apply_mask(ctx.normalized, train_mask);
    const FeatureSequence eval_inputs = apply_mask(ctx.normalized, eval_mask);

    TrainTask task;
    task.graph = &graph;
    task.train_inputs = &train_inputs;
    task.targets = &ctx.normalized;
    task.train_input_mask = train_mask;
    task.loss_mask = loss_mask;
    task.eval_inputs = &eval_inputs;
    task.eval_input_mask = eval_mask;
    task.val_mask = ctx.m_val;
    task.train_len = ctx.train_len;
    task.val_begin = ctx.val_begin;
    task.val_end = ctx.val_end;

    TrainReport report = train_model(model, task, tcfg);
    row.val_mse = report.best_val_mse;
    row.test_mse = evaluate_model(model, graph, eval_inputs, eval_mask, ctx.normalized,
                                  ctx.m_test, tcfg.horizon, ctx.test_begin, ctx.test_end);
}

}  // namespace

ResultRow run_cell(const DatasetBundle& bundle, const ExperimentConfig& cfg,
                   ModelKind kind, double share, int horizon, uint64_t seed) {
    ResultRow row;
    row.model = model_name(kind);
    row.share = share;
    row.horizon = horizon;
    row.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();

    const CellContext ctx = make_context(bundle, cfg, share, horizon, seed);
    const TrainConfig tcfg = cell_train_config(cfg, horizon, cell_seed(seed, share, horizon, kind));
    const auto observed = ctx.part.observed();

    switch (kind) {
        case ModelKind::FunsN:
        case ModelKind::FunsNNoLabels:
        case ModelKind::AllObservedBound:
            run_funs_cell(bundle, cfg, kind, ctx, tcfg, row);
            break;
        case ModelKind::Mean: {
            const auto mean = feature_mean(ctx.normalized, ctx.m_obs, 0, ctx.train_len);
            const FeatureSequence pred =
                mean_predict(mean, ctx.normalized.T, ctx.normalized.n);
            row.val_mse = imputer_eval(pred, ctx.normalized, ctx.m_val, horizon,
                                       ctx.val_begin, ctx.val_end);
            row.test_mse = imputer_eval(pred, ctx.normalized, ctx.m_test, horizon,
                                        ctx.test_begin, ctx.test_end);
            break;
        }
        case ModelKind::Knn: {
            const FeatureSequence visible = apply_mask(ctx.normalized, ctx.m_obs);
            const FeatureSequence imputed = impute_knn(visible, observed, bundle.graph);
            row.val_mse = imputer_eval(imputed, ctx.normalized, ctx.m_val, horizon,
                                       ctx.val_begin, ctx.val_end);
            row.test_mse = imputer_eval(imputed, ctx.normalized, ctx.m_test, horizon,
                                        ctx.test_begin, ctx.test_end);
            break;
        }
        case ModelKind::Gpr: {
            const FeatureSequence visible = apply_mask(ctx.normalized, ctx.m_obs);
            const FeatureSequence imputed =
                GprImputer(bundle.graph, observed, cfg.gpr).impute(visible);
            row.val_mse = imputer_eval(imputed, ctx.normalized, ctx.m_val, horizon,
                                       ctx.val_begin, ctx.val_end);
            row.test_mse = imputer_eval(imputed, ctx.normalized, ctx.m_test, horizon,
                                        ctx.test_begin, ctx.test_end);
            break;
        }
        case ModelKind::KnnLstm:
        case ModelKind::GprLstm: {
            const Imputer imp = kind == ModelKind::KnnLstm ? Imputer::Knn : Imputer::Gpr;
            const PipelineResult res = impute_then_forecast(
                imp, bundle.graph, ctx.normalized, ctx.part, tcfg, cfg.hidden, cfg.gpr,
                ctx.val_begin, ctx.val_end, ctx.test_begin, ctx.test_end);
            row.val_mse = res.val_mse;
            row.test_mse = res.test_mse;
            break;
        }
    }

    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return row;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs, bool dry_run) {
    cfg.validate();

    struct Cell {
        double share;
        int horizon;
        uint64_t seed;
        ModelKind kind;
    };
    std::vector<Cell> plan;
    for (double share : cfg.shares)
        for (int horizon : cfg.horizons)
            for (uint64_t seed : cfg.seeds)
                for (ModelKind kind : cfg.roster) plan.push_back({share, horizon, seed, kind});

    if (dry_run) {
        for (const auto& c : plan)
            std::cout << "plan: model=" << model_name(c.kind) << " share=" << c.share
                      << " horizon=" << c.horizon << " seed=" << c.seed << "\n";
        return {};
    }

    const DatasetBundle bundle = load_dataset(cfg);

    std::ofstream out(cfg.output_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output " + cfg.output_path);
    out << "model,share,horizon,seed,val_mse,test_mse,wall_ms\n";
    out.flush();

    ExperimentResult result;
    result.rows.resize(plan.size());
    std::mutex io_mutex;
    std::atomic<size_t> next{0};
    std::atomic<bool> any_failed{false};

    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= plan.size()) return;
            const Cell& c = plan[i];
            ResultRow row;
            try {
                row = run_cell(bundle, cfg, c.kind, c.share, c.horizon, c.seed);
                const auto part = split_nodes(bundle.graph.n, c.share,
                                              partition_seed(c.seed, c.share));
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "cell model=" << row.model << " share=" << row.share
                          << " horizon=" << row.horizon << " seed=" << row.seed
                          << " partition_hash=" << std::hex << part.hash() << std::dec
                          << " test_mse=" << row.test_mse << " wall_ms=" << row.wall_ms
                          << "\n";
            } catch (const std::exception& e) {
                row.model = model_name(c.kind);
                row.share = c.share;
                row.horizon = c.horizon;
                row.seed = c.seed;
                row.val_mse = std::numeric_limits<double>::quiet_NaN();
                row.test_mse = std::numeric_limits<double>::quiet_NaN();
                row.failed = true;
                any_failed = true;
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "cell FAILED model=" << row.model << " share=" << row.share
                          << " horizon=" << row.horizon << " seed=" << row.seed << ": "
                          << e.what() << "\n";
            }
            {
                std::lock_guard<std::mutex> lock(io_mutex);
                out << row.to_csv() << "\n";
                out.flush();
                result.rows[i] = row;
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    result.all_succeeded = !any_failed;
    return result;
}

std::vector<SummaryRow> summarize(const std::string& result_path) {
    std::ifstream is(result_path);
    if (!is) throw std::runtime_error("cannot open results " + result_path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("model,share,horizon,seed", 0) != 0)
        throw std::runtime_error("summarize: unrecognized results header in " + result_path);

    struct Key {
        std::string model;
        double share;
        int horizon;
        bool operator<(const Key& o) const {
            return std::tie(model, share, horizon) < std::tie(o.model, o.share, o.horizon);
        }
    };
    std::map<Key, std::vector<double>> groups;
    std::map<Key, int> failures;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string model, share_s, horizon_s, seed_s, val_s, test_s, wall_s;
        std::getline(ls, model, ',');
        std::getline(ls, share_s, ',');
        std::getline(ls, horizon_s, ',');
        std::getline(ls, seed_s, ',');
        std::getline(ls, val_s, ',');
        std::getline(ls, test_s, ',');
        std::getline(ls, wall_s, ',');
        const Key key{model, std::stod(share_s), std::stoi(horizon_s)};
        const double test = std::stod(test_s);
        if (std::isfinite(test))
            groups[key].push_back(test);
        else
            failures[key] += 1;
    }

    std::vector<SummaryRow> rows;
    for (const auto& [key, values] : groups) {
        SummaryRow r;
        r.model = key.model;
        r.share = key.share;
        r.horizon = key.horizon;
        r.n_seeds = static_cast<int>(values.size());
        r.n_failed = failures.count(key) ? failures[key] : 0;
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        r.mean_test_mse = mean;
        r.std_test_mse = std::sqrt(var / values.size());
        rows.push_back(r);
    }
    for (const auto& [key, count] : failures) {
        if (groups.count(key)) continue;  // already reported with n_failed
        SummaryRow r;
        r.model = key.model;
        r.share = key.share;
        r.horizon = key.horizon;
        r.n_seeds = 0;
        r.n_failed = count;
        r.mean_test_mse = std::numeric_limits<double>::quiet_NaN();
        r.std_test_mse = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(r);
    }
    return rows;
}

std::string render_summary(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-20s %7s %8s %12s %12s %7s %7s\n", "model", "share",
                  "horizon", "mean_mse", "std_mse", "seeds", "failed");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-20s %7.3f %8d %12.4f %12.4f %7d %7d\n",
                      r.model.c_str(), r.share, r.horizon, r.mean_test_mse, r.std_test_mse,
                      r.n_seeds, r.n_failed);
        os << buf;
    }
    return os.str();
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open summary output " + path);
    os << "model,share,horizon,mean_test_mse,std_test_mse,n_seeds,n_failed\n";
    for (const auto& r : rows)
        os << r.model << "," << r.share << "," << r.horizon << "," << fmt_mse(r.mean_test_mse)
           << "," << fmt_mse(r.std_test_mse) << "," << r.n_seeds << "," << r.n_failed << "\n";
}

}  // namespace funs
