#pragma once

#include "funs/graph.hpp"
#include "funs/params.hpp"
#include "funs/tape.hpp"

namespace funs {

// Anything trainable by the BPTT harness: unrolls a window on a tape and
// emits one n x d prediction per step.
class SequenceModel {
public:
    virtual ~SequenceModel() = default;

    virtual std::vector<Tape::Id> forward_sequence(Tape& tape, const ParamBinding& bind,
                                                   const std::vector<Matrix>& window,
                                                   const std::vector<double>& input_mask,
                                                   const SensorGraph& graph, bool training,
                                                   std::mt19937_64& rng) const = 0;

    virtual ParamSet& params() = 0;
    virtual const ParamSet& params() const = 0;

    // Eval-mode forward returning plain matrices.
    std::vector<Matrix> predict(const std::vector<Matrix>& window,
                                const std::vector<double>& input_mask,
                                const SensorGraph& graph) const {
        Tape tape;
        ParamBinding bind(tape, params());
        std::mt19937_64 rng(0);
        auto ids = forward_sequence(tape, bind, window, input_mask, graph, false, rng);
        std::vector<Matrix> out;
        out.reserve(ids.size());
        for (Tape::Id id : ids) out.push_back(tape.value(id));
        return out;
    }
};

}  // namespace funs
