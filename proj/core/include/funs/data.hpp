#pragma once

#include <optional>
#include <string>

#include "funs/graph.hpp"

namespace funs {

struct SyntheticConfig {
    int n_nodes = 150;
    int T = 294;
    int d = 2;                  // density, speed
    int road_types = 4;
    double diffusion = 0.4;     // neighbor coupling of the latent state
    double cycle_period = 48.0; // steps per daily cycle
    double cycle_amplitude = 1.0;
    double noise = 0.35;        // observation noise level
    uint64_t seed = 0;

    void validate() const {
        if (n_nodes < 4) throw std::invalid_argument("SyntheticConfig: n_nodes must be >= 4");
        if (T < 50) throw std::invalid_argument("SyntheticConfig: T must be >= 50");
        if (diffusion <= 0.0 || diffusion >= 1.0)
            throw std::invalid_argument("SyntheticConfig: diffusion must be in (0,1)");
        if (road_types < 1 || d != 2)
            throw std::invalid_argument("SyntheticConfig: road_types >= 1 and d == 2 required");
    }
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> floored;  // per feature: std hit the 1e-8 floor

    bool any_floored() const {
        for (bool f : floored)
            if (f) return true;
        return false;
    }
};

struct DatasetBundle {
    SensorGraph graph;
    FeatureSequence features;
    std::vector<std::string> feature_names;
    std::string provenance;  // JSON text: seed, config, source files
};

// Grid-based road graph with random edge deletions (connectivity preserved),
// one-hot road types plus length and speed-limit label columns, and a
// label-dependent diffusion + daily-cycle + noise state process.
DatasetBundle generate_synthetic(const SyntheticConfig& cfg);

// Layout: values.csv is T rows x (n*d) columns in d blocks of n columns;
// coords.csv has n rows of x,y; labels.csv (optional) n rows x z. Edges come
// from edges_path when given, otherwise from threshold_graph(coords, delta).
DatasetBundle load_csv_dataset(const std::string& values_path, const std::string& coords_path,
                               const std::optional<std::string>& labels_path, double delta,
                               const std::optional<std::string>& edges_path = {});

// Writes values.csv, coords.csv, labels.csv, edges.csv and metadata.json
// under dir. Doubles are printed round-trip exact.
void save_bundle_csv(const DatasetBundle& bundle, const std::string& dir);

// Per-feature stats over node_mask nodes in [t_begin, t_end); std floored at 1e-8.
NormStats compute_stats(const FeatureSequence& x, const std::vector<double>& node_mask,
                        int t_begin, int t_end);
FeatureSequence normalize(const FeatureSequence& x, const NormStats& stats);
FeatureSequence denormalize(const FeatureSequence& x, const NormStats& stats);

}  // namespace funs
