#include "funs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace funs {

namespace {

bool connected(int n, const std::vector<std::pair<int, int>>& undirected_edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : undirected_edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                queue.push_back(v);
            }
    }
    return count == n;
}

std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

DatasetBundle generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_nodes;

    for (int attempt = 0; attempt < 16; ++attempt) {
        std::mt19937_64 rng(cfg.seed + static_cast<uint64_t>(attempt) * 0x9e3779b97f4a7c15ull);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        // Grid skeleton with jittered coordinates.
        const int grid_cols = std::max(2, static_cast<int>(std::ceil(std::sqrt(double(n)))));
        std::vector<std::pair<double, double>> coords(n);
        for (int i = 0; i < n; ++i) {
            const int r = i / grid_cols, c = i % grid_cols;
            coords[i] = {c + 0.1 * (unif(rng) - 0.5), r + 0.1 * (unif(rng) - 0.5)};
        }
        std::vector<std::pair<int, int>> grid_edges;
        for (int i = 0; i < n; ++i) {
            const int r = i / grid_cols, c = i % grid_cols;
            if (c + 1 < grid_cols && i + 1 < n) grid_edges.emplace_back(i, i + 1);
            if (i + grid_cols < n) grid_edges.emplace_back(i, i + grid_cols);
        }

        // Thin out edges, skipping deletions that would disconnect the graph.
        std::shuffle(grid_edges.begin(), grid_edges.end(), rng);
        std::vector<std::pair<int, int>> kept = grid_edges;
        const int target_deletions = static_cast<int>(0.15 * grid_edges.size());
        int deleted = 0;
        for (size_t e = 0; e < kept.size() && deleted < target_deletions;) {
            std::vector<std::pair<int, int>> trial = kept;
            trial.erase(trial.begin() + static_cast<long>(e));
            if (connected(n, trial)) {
                kept = std::move(trial);
                ++deleted;
            } else {
                ++e;
            }
        }
        if (!connected(n, kept)) continue;  // paranoia; retry with fresh randomness

        // Road types drive base level, diffusion speed, cycle phase/gain.
        // Types are spatially clustered (nearest of R random anchor nodes) so
        // that neighborhoods are mostly homogeneous; a small fraction of nodes
        // is re-rolled uniformly to keep type boundaries irregular.
        const int R = cfg.road_types;
        std::vector<int> anchor(R);
        for (int r = 0; r < R; ++r) anchor[r] = static_cast<int>(unif(rng) * n) % n;
        std::vector<int> type(n);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int r = 0; r < R; ++r) {
                const double dx = coords[i].first - coords[anchor[r]].first;
                const double dy = coords[i].second - coords[anchor[r]].second;
                const double dd = dx * dx + dy * dy;
                if (dd < best_d) {
                    best_d = dd;
                    best = r;
                }
            }
            type[i] = best;
            if (unif(rng) < 0.05) type[i] = static_cast<int>(unif(rng) * R) % R;
        }
        std::vector<double> base(R), gain(R), phase(R), diff_rate(R), speed_limit(R);
        for (int r = 0; r < R; ++r) {
            base[r] = 1.0 + 0.8 * r;
            gain[r] = 0.7 + 0.3 * r;
            phase[r] = 2.0 * M_PI * r / R;
            diff_rate[r] = cfg.diffusion * (0.5 + r / double(std::max(1, R - 1)));
            speed_limit[r] = 30.0 + 20.0 * r;
        }

        const int z = R + 2;  // one-hot type, length, speed limit
        Matrix labels(n, z);
        std::vector<double> length(n);
        for (int i = 0; i < n; ++i) {
            labels.at(i, type[i]) = 1.0;
            length[i] = 0.5 + 1.5 * unif(rng);
            labels.at(i, R) = length[i];
            labels.at(i, R + 1) = speed_limit[type[i]] / 50.0;
        }

        std::vector<std::pair<int, int>> directed;
        directed.reserve(kept.size() * 2);
        for (const auto& [a, b] : kept) {
            directed.emplace_back(a, b);
            directed.emplace_back(b, a);
        }
        SensorGraph graph = SensorGraph::from_edges(n, directed, labels);
        graph.coords = coords;

        // Latent state: mean-reverting diffusion along edges.
        const int burn_in = 50;
        std::vector<double> s(n, 0.0), s_next(n);
        FeatureSequence features(cfg.T, n, 2);
        for (int t = -burn_in; t < cfg.T; ++t) {
            for (int i = 0; i < n; ++i) {
                double neigh = 0.0;
                const auto& nbrs = graph.in_neighbors[i];
                for (int j : nbrs) neigh += s[j];
                if (!nbrs.empty()) neigh /= static_cast<double>(nbrs.size());
                const double drive = (cfg.noise > 0.0) ? 0.35 * gauss(rng) : 0.0;
                s_next[i] = s[i] + diff_rate[type[i]] * (neigh - s[i]) - 0.06 * s[i] + drive;
            }
            s.swap(s_next);
            if (t < 0) continue;
            const double day = std::sin(2.0 * M_PI * t / cfg.cycle_period);
            const double day_q = std::sin(2.0 * M_PI * t / cfg.cycle_period + M_PI / 3.0);
            for (int i = 0; i < n; ++i) {
                const int r = type[i];
                const double cyc =
                    cfg.cycle_amplitude * gain[r] *
                    (day * std::cos(phase[r]) + day_q * std::sin(phase[r]));
                const double density = base[r] + gain[r] * s[i] + cyc +
                                       cfg.noise * gauss(rng);
                const double speed = speed_limit[r] / 50.0 - 0.6 * gain[r] * s[i] -
                                     0.5 * cyc + cfg.noise * gauss(rng);
                features.at(t, i, 0) = density;
                features.at(t, i, 1) = speed;
            }
        }

        DatasetBundle bundle;
        bundle.graph = std::move(graph);
        bundle.features = std::move(features);
        bundle.feature_names = {"density", "speed"};
        nlohmann::json meta;
        meta["source"] = "synthetic";
        meta["seed"] = cfg.seed;
        meta["n_nodes"] = cfg.n_nodes;
        meta["T"] = cfg.T;
        meta["road_types"] = cfg.road_types;
        meta["diffusion"] = cfg.diffusion;
        meta["cycle_period"] = cfg.cycle_period;
        meta["cycle_amplitude"] = cfg.cycle_amplitude;
        meta["noise"] = cfg.noise;
        bundle.provenance = meta.dump(2);
        return bundle;
    }
    throw std::runtime_error("generate_synthetic: could not build a connected graph");
}

namespace {

std::vector<std::vector<double>> read_csv_numeric(const std::string& path, bool skip_header) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string cell = line.substr(pos, comma - pos);
            try {
                size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("non-numeric cell '" + cell + "' in " + path);
            }
            pos = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

DatasetBundle load_csv_dataset(const std::string& values_path, const std::string& coords_path,
                               const std::optional<std::string>& labels_path, double delta,
                               const std::optional<std::string>& edges_path) {
    const auto coord_rows = read_csv_numeric(coords_path, true);
    const int n = static_cast<int>(coord_rows.size());
    if (n < 4) throw std::runtime_error("load_csv_dataset: need at least 4 nodes, got " +
                                        std::to_string(n));
    std::vector<std::pair<double, double>> coords(n);
    for (int i = 0; i < n; ++i) {
        if (coord_rows[i].size() != 2)
            throw std::runtime_error("load_csv_dataset: coords row must be x,y");
        coords[i] = {coord_rows[i][0], coord_rows[i][1]};
    }

    const auto value_rows = read_csv_numeric(values_path, true);
    const int T = static_cast<int>(value_rows.size());
    if (T == 0) throw std::runtime_error("load_csv_dataset: empty values file");
    const int total_cols = static_cast<int>(value_rows[0].size());
    if (total_cols % n != 0)
        throw std::runtime_error("load_csv_dataset: values column count " +
                                 std::to_string(total_cols) + " is not a multiple of n=" +
                                 std::to_string(n));
    const int d = total_cols / n;
    FeatureSequence features(T, n, d);
    for (int t = 0; t < T; ++t) {
        if (static_cast<int>(value_rows[t].size()) != total_cols)
            throw std::runtime_error("load_csv_dataset: ragged values row " + std::to_string(t));
        for (int f = 0; f < d; ++f)
            for (int i = 0; i < n; ++i)
                features.at(t, i, f) = value_rows[t][f * n + i];
    }

    Matrix labels;
    if (labels_path) {
        const auto label_rows = read_csv_numeric(*labels_path, true);
        if (static_cast<int>(label_rows.size()) != n)
            throw std::runtime_error("load_csv_dataset: labels row count != n");
        const int z = static_cast<int>(label_rows[0].size());
        labels = Matrix(n, z);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < z; ++c) labels.at(i, c) = label_rows[i][c];
    }  // absent -> ones column via from_edges

    std::vector<std::pair<int, int>> edges;
    if (edges_path) {
        for (const auto& row : read_csv_numeric(*edges_path, true)) {
            if (row.size() != 2) throw std::runtime_error("load_csv_dataset: edges row must be src,dst");
            edges.emplace_back(static_cast<int>(row[0]), static_cast<int>(row[1]));
        }
    } else {
        auto res = threshold_graph(coords, delta);
        edges = std::move(res.edges);
    }

    DatasetBundle bundle;
    bundle.graph = SensorGraph::from_edges(n, std::move(edges), std::move(labels));
    bundle.graph.coords = std::move(coords);
    bundle.features = std::move(features);
    for (int f = 0; f < d; ++f) bundle.feature_names.push_back("f" + std::to_string(f));
    nlohmann::json meta;
    meta["source"] = "csv";
    meta["values"] = values_path;
    meta["coords"] = coords_path;
    if (labels_path) meta["labels"] = *labels_path;
    if (edges_path) meta["edges"] = *edges_path;
    meta["delta"] = delta;
    bundle.provenance = meta.dump(2);
    return bundle;
}

void save_bundle_csv(const DatasetBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& x = bundle.features;

    {
        std::ofstream os(dir + "/values.csv");
        for (int f = 0; f < x.d; ++f)
            for (int i = 0; i < x.n; ++i) {
                const std::string name = (f < static_cast<int>(bundle.feature_names.size()))
                                             ? bundle.feature_names[f]
                                             : "f" + std::to_string(f);
                os << (f == 0 && i == 0 ? "" : ",") << name << "_n" << i;
            }
        os << "\n";
        for (int t = 0; t < x.T; ++t) {
            for (int f = 0; f < x.d; ++f)
                for (int i = 0; i < x.n; ++i)
                    os << (f == 0 && i == 0 ? "" : ",") << fmt_double(x.at(t, i, f));
            os << "\n";
        }
    }
    {
        std::ofstream os(dir + "/coords.csv");
        os << "x,y\n";
        for (const auto& [cx, cy] : bundle.graph.coords)
            os << fmt_double(cx) << "," << fmt_double(cy) << "\n";
    }
    {
        std::ofstream os(dir + "/labels.csv");
        const Matrix& l = bundle.graph.labels;
        for (int c = 0; c < l.cols; ++c) os << (c ? "," : "") << "l" << c;
        os << "\n";
        for (int i = 0; i < l.rows; ++i) {
            for (int c = 0; c < l.cols; ++c) os << (c ? "," : "") << fmt_double(l.at(i, c));
            os << "\n";
        }
    }
    {
        std::ofstream os(dir + "/edges.csv");
        os << "src,dst\n";
        for (const auto& [s, d] : bundle.graph.edges) os << s << "," << d << "\n";
    }
    {
        std::ofstream os(dir + "/metadata.json");
        os << bundle.provenance << "\n";
    }
}

NormStats compute_stats(const FeatureSequence& x, const std::vector<double>& node_mask,
                        int t_begin, int t_end) {
    if (t_begin >= t_end) throw std::invalid_argument("compute_stats: empty training range");
    NormStats stats;
    stats.mean.assign(x.d, 0.0);
    stats.stddev.assign(x.d, 0.0);
    stats.floored.assign(x.d, false);
    size_t count = 0;
    for (int t = t_begin; t < t_end; ++t)
        for (int i = 0; i < x.n; ++i) {
            if (node_mask[i] == 0.0) continue;
            for (int f = 0; f < x.d; ++f) stats.mean[f] += x.at(t, i, f);
            ++count;
        }
    if (count == 0) throw std::invalid_argument("compute_stats: no observed entries");
    for (double& m : stats.mean) m /= static_cast<double>(count);
    for (int t = t_begin; t < t_end; ++t)
        for (int i = 0; i < x.n; ++i) {
            if (node_mask[i] == 0.0) continue;
            for (int f = 0; f < x.d; ++f) {
                const double diff = x.at(t, i, f) - stats.mean[f];
                stats.stddev[f] += diff * diff;
            }
        }
    for (int f = 0; f < x.d; ++f) {
        stats.stddev[f] = std::sqrt(stats.stddev[f] / static_cast<double>(count));
        if (stats.stddev[f] < 1e-8) {
            stats.stddev[f] = 1e-8;
            stats.floored[f] = true;
        }
    }
    return stats;
}

FeatureSequence normalize(const FeatureSequence& x, const NormStats& stats) {
    FeatureSequence out = x;
    for (int t = 0; t < x.T; ++t)
        for (int i = 0; i < x.n; ++i)
            for (int f = 0; f < x.d; ++f)
                out.at(t, i, f) = (x.at(t, i, f) - stats.mean[f]) / stats.stddev[f];
    return out;
}

FeatureSequence denormalize(const FeatureSequence& x, const NormStats& stats) {
    FeatureSequence out = x;
    for (int t = 0; t < x.T; ++t)
        for (int i = 0; i < x.n; ++i)
            for (int f = 0; f < x.d; ++f)
                out.at(t, i, f) = x.at(t, i, f) * stats.stddev[f] + stats.mean[f];
    return out;
}

}  // namespace funs
