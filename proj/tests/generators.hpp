#pragma once

// Random valid networks for property tests. Every number has at most six
// significant digits so the canonical text form is exact.

#include <cmath>
#include <string>
#include <vector>

#include "promobn/network.hpp"
#include "promobn/rng.hpp"

namespace testgen {

using namespace promobn;

// Probabilities k / 1000 summing to exactly 1000 thousandths.
inline std::vector<double> random_distribution(RandomStream& rng, std::size_t k) {
    std::vector<int> parts(k, 1);
    for (int left = 1000 - static_cast<int>(k); left > 0; --left) {
        parts[rng.below(k)] += 1;
    }
    std::vector<double> out;
    for (int p : parts) {
        out.push_back(p / 1000.0);
    }
    return out;
}

inline double round4(double x) { return std::round(x * 1e4) / 1e4; }

inline DistTerm random_term(RandomStream& rng) {
    const double scale = rng.uniform() < 0.5 ? 1.0 : round4(0.05 + rng.uniform());
    if (rng.uniform() < 0.5) {
        const double lo = round4(rng.uniform() * 20);
        const double mode = round4(lo + rng.uniform() * 10);
        const double hi = round4(mode + 0.5 + rng.uniform() * 30);
        return DistTerm::triangular(lo, mode, hi, scale);
    }
    return DistTerm::lognormal(round4(rng.uniform() * 6 - 1), round4(0.05 + rng.uniform()), scale);
}

// Random valid network: root chance nodes, CPT and deterministic children,
// and one equation leaf choosing over some discrete nodes.
inline Network random_network(std::uint64_t seed) {
    RandomStream rng(seed);
    Network net("rand " + std::to_string(seed));
    const std::size_t discrete = 2 + rng.below(4);
    for (std::size_t i = 0; i < discrete; ++i) {
        Node n;
        n.id = "N" + std::to_string(i);
        const std::size_t k = 2 + rng.below(3);
        for (std::size_t s = 0; s < k; ++s) {
            n.states.push_back("s" + std::to_string(s) + "_" + std::to_string(i));
        }
        if (i > 0 && rng.uniform() < 0.6) {
            n.parents.push_back("N" + std::to_string(rng.below(i)));
        }
        if (n.parents.empty()) {
            n.prior = random_distribution(rng, k);
        } else {
            const Node& parent = net.at(n.parents.front());
            n.kind = rng.uniform() < 0.5 ? NodeKind::Chance : NodeKind::Deterministic;
            for (const std::string& ps : parent.states) {
                if (n.kind == NodeKind::Chance) {
                    n.cpt[{ps}] = random_distribution(rng, k);
                } else {
                    n.det_map[{ps}] = n.states[rng.below(k)];
                }
            }
        }
        net.add_node(std::move(n));
    }
    Node eq;
    eq.id = "Y";
    eq.kind = NodeKind::Equation;
    for (std::size_t i = 0; i < discrete; ++i) {
        if (i == 0 || rng.uniform() < 0.5) {
            const Node& sel = net.at("N" + std::to_string(i));
            eq.parents.push_back(sel.id);
            ChooseTerm term{sel.id, {}};
            for (std::size_t s = 0; s < sel.states.size(); ++s) {
                term.branches.push_back(random_term(rng));
            }
            eq.expr.terms.push_back(std::move(term));
        }
    }
    net.add_node(std::move(eq));
    return net;
}

}  // namespace testgen
