#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promobn/inference.hpp"
#include "promobn/network.hpp"

namespace promobn::detail {

// Index-based view of a validated network for the samplers and the
// enumerator. Discrete nodes occupy "slots" in topological order.
struct CompiledDiscrete {
    std::string id;
    NodeKind kind = NodeKind::Chance;
    std::size_t declaration = 0;
    std::vector<std::size_t> parent_slots;
    std::vector<std::size_t> strides;
    std::size_t n_states = 0;
    std::vector<double> probs;          // chance: rows x n_states
    std::vector<std::uint16_t> mapped;  // deterministic: one state per row

    std::size_t row(const std::vector<std::uint16_t>& states) const {
        std::size_t r = 0;
        for (std::size_t i = 0; i < parent_slots.size(); ++i) {
            r += strides[i] * states[parent_slots[i]];
        }
        return r;
    }
};

struct CompiledTerm {
    std::size_t selector_slot = 0;
    std::vector<DistTerm> branches;
};

struct CompiledModel {
    std::vector<CompiledDiscrete> discrete;
    std::size_t equation_count = 0;
    std::string equation_id;  // first equation node in declaration order
    std::vector<CompiledTerm> terms;

    std::size_t slot(std::string_view id) const;
};

// Throws ModelError for invalid networks.
CompiledModel compile(const Network& net);

// Requires exactly one equation node.
CompiledModel compile_with_equation(const Network& net);

struct Configuration {
    std::vector<std::uint16_t> states;  // by slot
    double weight = 0.0;                // P(states, evidence)
};

// All joint discrete states with positive probability that agree with the
// evidence. Throws InconsistentEvidenceError when none exist.
std::vector<Configuration> enumerate(const CompiledModel& model, const Network& net,
                                     const DiscreteEvidence& evidence);

}  // namespace promobn::detail
