#pragma once

#include <random>
#include <string>
#include <vector>

#include "funs/matrix.hpp"
#include "funs/tape.hpp"

namespace funs {

// Flat, ordered collection of named parameter matrices. Ordering is the
// declaration order, which the optimizer and checkpoint format both rely on.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Matrix value;
    };

    int add(std::string name, Matrix value) {
        entries_.push_back({std::move(name), std::move(value)});
        return static_cast<int>(entries_.size()) - 1;
    }

    Matrix& operator[](int i) { return entries_[i].value; }
    const Matrix& operator[](int i) const { return entries_[i].value; }
    const std::string& name(int i) const { return entries_[i].name; }
    int count() const { return static_cast<int>(entries_.size()); }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

// Per-pass binding of every parameter to a tape leaf, so gradients can be
// read back by parameter index after backward().
class ParamBinding {
public:
    ParamBinding(Tape& tape, const ParamSet& params) {
        ids_.reserve(params.count());
        for (int i = 0; i < params.count(); ++i)
            ids_.push_back(tape.leaf(params[i], true));
    }

    Tape::Id id(int param_index) const { return ids_[param_index]; }
    const std::vector<Tape::Id>& ids() const { return ids_; }

private:
    std::vector<Tape::Id> ids_;
};

inline Matrix uniform_init(int rows, int cols, double bound, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& x : m.v) x = u(rng);
    return m;
}

// Checkpoint container: binary, little-endian doubles, bit-exact round trip.
void save_params(const ParamSet& params, const std::string& path);
void load_params(ParamSet& params, const std::string& path);

}  // namespace funs
