#include "promobn/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "promobn/error.hpp"

namespace promobn {

std::string_view to_string(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::Chance:
            return "chance";
        case NodeKind::Deterministic:
            return "deterministic";
        case NodeKind::Equation:
            return "equation";
    }
    return "unknown";
}

std::optional<std::size_t> Node::state_index(std::string_view state) const {
    const auto it = std::find(states.begin(), states.end(), state);
    if (it == states.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - states.begin());
}

const Node* Network::find(std::string_view id) const {
    const auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.id == id; });
    return it == nodes_.end() ? nullptr : &*it;
}

Node* Network::find(std::string_view id) {
    const auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.id == id; });
    return it == nodes_.end() ? nullptr : &*it;
}

const Node& Network::at(std::string_view id) const {
    if (const Node* n = find(id)) {
        return *n;
    }
    throw InputError(fmt::format("unknown node '{}'", id));
}

std::vector<std::pair<std::string, std::string>> Network::edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Node& n : nodes_) {
        for (const std::string& p : n.parents) {
            out.emplace_back(p, n.id);
        }
    }
    return out;
}

std::vector<std::string> Network::children(std::string_view id) const {
    std::vector<std::string> out;
    for (const Node& n : nodes_) {
        if (std::find(n.parents.begin(), n.parents.end(), id) != n.parents.end()) {
            out.push_back(n.id);
        }
    }
    return out;
}

namespace {

// Calls fn(tuple) for every combination of parent states, first parent
// varying slowest.
template <class Fn>
void for_each_parent_tuple(const std::vector<const Node*>& parents, Fn&& fn) {
    StateTuple tuple(parents.size());
    std::vector<std::size_t> idx(parents.size(), 0);
    for (;;) {
        for (std::size_t i = 0; i < parents.size(); ++i) {
            tuple[i] = parents[i]->states[idx[i]];
        }
        fn(tuple);
        std::size_t k = parents.size();
        while (k > 0) {
            --k;
            if (++idx[k] < parents[k]->states.size()) {
                break;
            }
            idx[k] = 0;
            if (k == 0) {
                return;
            }
        }
        if (parents.empty()) {
            return;
        }
    }
}

std::string join(const StateTuple& t) {
    return fmt::format("[{}]", fmt::join(t, ", "));
}

std::optional<std::string> check_distribution(const std::vector<double>& p, std::size_t expected) {
    if (p.size() != expected) {
        return fmt::format("has {} probabilities for {} states", p.size(), expected);
    }
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            return fmt::format("probability {} outside [0, 1]", v);
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        return fmt::format("probabilities sum to {:.12g}, not 1", sum);
    }
    return std::nullopt;
}

// Kahn's algorithm picking the earliest-declared ready node each round.
// Returns indices of the nodes that could be ordered.
std::vector<std::size_t> stable_kahn(const Network& net) {
    const auto& nodes = net.nodes();
    std::vector<bool> placed(nodes.size(), false);
    std::vector<std::size_t> order;
    order.reserve(nodes.size());
    std::set<std::string> done;
    bool progress = true;
    while (progress && order.size() < nodes.size()) {
        progress = false;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (placed[i]) {
                continue;
            }
            const bool ready = std::all_of(nodes[i].parents.begin(), nodes[i].parents.end(),
                                           [&](const std::string& p) { return done.contains(p); });
            if (ready) {
                placed[i] = true;
                order.push_back(i);
                done.insert(nodes[i].id);
                progress = true;
                break;
            }
        }
    }
    return order;
}

}  // namespace

ValidationReport validate_network(const Network& net) {
    ValidationReport report;
    auto flag = [&](const std::string& node, std::string reason) {
        report.push_back({node, std::move(reason)});
    };

    const auto& nodes = net.nodes();
    std::set<std::string> seen;
    for (const Node& n : nodes) {
        if (n.id.empty()) {
            flag(n.id, "node id is empty");
        }
        if (!seen.insert(n.id).second) {
            flag(n.id, "duplicate node id");
        }
    }

    bool parents_resolve = true;
    for (const Node& n : nodes) {
        std::set<std::string> unique_parents;
        for (const std::string& p : n.parents) {
            if (!unique_parents.insert(p).second) {
                flag(n.id, fmt::format("parent '{}' listed twice", p));
            }
            const Node* pn = net.find(p);
            if (pn == nullptr) {
                flag(n.id, fmt::format("unknown parent '{}'", p));
                parents_resolve = false;
            } else if (pn->kind == NodeKind::Equation) {
                flag(p, fmt::format("equation node has child '{}'; equation nodes must be leaves", n.id));
            }
        }
    }

    for (const Node& n : nodes) {
        if (n.is_discrete()) {
            if (n.states.size() < 2) {
                flag(n.id, "discrete nodes need at least 2 states");
            }
            std::set<std::string> st(n.states.begin(), n.states.end());
            if (st.size() != n.states.size()) {
                flag(n.id, "duplicate state names");
            }
        } else if (!n.states.empty()) {
            flag(n.id, "equation nodes do not declare states");
        }

        std::vector<const Node*> parents;
        bool discrete_parents = true;
        for (const std::string& p : n.parents) {
            const Node* pn = net.find(p);
            if (pn == nullptr || !pn->is_discrete()) {
                discrete_parents = false;
            } else {
                parents.push_back(pn);
            }
        }

        switch (n.kind) {
            case NodeKind::Chance: {
                if (!n.det_map.empty()) {
                    flag(n.id, "chance node carries a deterministic map");
                }
                if (n.parents.empty()) {
                    if (!n.cpt.empty()) {
                        flag(n.id, "root chance node carries a CPT; use a prior");
                    }
                    if (n.states.size() >= 2) {
                        if (auto why = check_distribution(n.prior, n.states.size())) {
                            flag(n.id, "prior " + *why);
                        }
                    }
                    break;
                }
                if (!n.prior.empty()) {
                    flag(n.id, "non-root chance node carries a prior; use a CPT");
                }
                if (!discrete_parents) {
                    break;
                }
                std::size_t expected = 0;
                for_each_parent_tuple(parents, [&](const StateTuple& t) {
                    ++expected;
                    const auto it = n.cpt.find(t);
                    if (it == n.cpt.end()) {
                        flag(n.id, fmt::format("CPT has no row for parent states {}", join(t)));
                    } else if (n.states.size() >= 2) {
                        if (auto why = check_distribution(it->second, n.states.size())) {
                            flag(n.id, fmt::format("CPT row {} {}", join(t), *why));
                        }
                    }
                });
                if (n.cpt.size() > expected) {
                    flag(n.id, "CPT has rows for unknown parent-state combinations");
                }
                break;
            }
            case NodeKind::Deterministic: {
                if (!n.prior.empty() || !n.cpt.empty()) {
                    flag(n.id, "deterministic node carries probabilities");
                }
                if (!discrete_parents) {
                    break;
                }
                std::size_t expected = 0;
                for_each_parent_tuple(parents, [&](const StateTuple& t) {
                    ++expected;
                    const auto it = n.det_map.find(t);
                    if (it == n.det_map.end()) {
                        flag(n.id, fmt::format("map is not total: no entry for {}", join(t)));
                    } else if (!n.state_index(it->second)) {
                        flag(n.id, fmt::format("map sends {} to unknown state '{}'", join(t), it->second));
                    }
                });
                if (n.det_map.size() > expected) {
                    flag(n.id, "map has entries for unknown parent-state combinations");
                }
                break;
            }
            case NodeKind::Equation: {
                if (!n.prior.empty() || !n.cpt.empty() || !n.det_map.empty()) {
                    flag(n.id, "equation node carries a discrete table");
                }
                if (n.expr.terms.empty()) {
                    flag(n.id, "equation has no terms");
                }
                for (const ChooseTerm& term : n.expr.terms) {
                    if (std::find(n.parents.begin(), n.parents.end(), term.selector) == n.parents.end()) {
                        flag(n.id, fmt::format("selector '{}' is not a declared parent", term.selector));
                        continue;
                    }
                    const Node* sel = net.find(term.selector);
                    if (sel == nullptr) {
                        continue;
                    }
                    if (!sel->is_discrete()) {
                        flag(n.id, fmt::format("selector '{}' is not discrete", term.selector));
                        continue;
                    }
                    if (term.branches.size() != sel->states.size()) {
                        flag(n.id, fmt::format("arity mismatch: Choose({}) has {} branches for {} states",
                                               term.selector, term.branches.size(), sel->states.size()));
                    }
                    for (const DistTerm& b : term.branches) {
                        if (auto why = check_term(b)) {
                            flag(n.id, fmt::format("in Choose({}): {}", term.selector, *why));
                        }
                    }
                }
                break;
            }
        }
    }

    if (parents_resolve) {
        const auto order = stable_kahn(net);
        if (order.size() < nodes.size()) {
            std::vector<bool> placed(nodes.size(), false);
            for (std::size_t i : order) {
                placed[i] = true;
            }
            std::vector<std::string> stuck;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                if (!placed[i]) {
                    stuck.push_back(nodes[i].id);
                }
            }
            flag("", fmt::format("directed cycle among nodes {}", fmt::join(stuck, ", ")));
        }
    }
    return report;
}

void require_valid(const Network& net) {
    const ValidationReport report = validate_network(net);
    if (report.empty()) {
        return;
    }
    std::string msg = "invalid network:";
    for (const Violation& v : report) {
        msg += v.node.empty() ? fmt::format(" {};", v.reason) : fmt::format(" {}: {};", v.node, v.reason);
    }
    throw ModelError(msg);
}

std::vector<std::string> topological_order(const Network& net) {
    for (const Node& n : net.nodes()) {
        for (const std::string& p : n.parents) {
            if (net.find(p) == nullptr) {
                throw ModelError(fmt::format("node '{}' has unknown parent '{}'", n.id, p));
            }
        }
    }
    const auto order = stable_kahn(net);
    if (order.size() != net.nodes().size()) {
        throw ModelError("network contains a directed cycle");
    }
    std::vector<std::string> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) {
        ids.push_back(net.nodes()[i].id);
    }
    return ids;
}

const std::string& resolve_deterministic(const Node& node, const StateTuple& parent_states) {
    if (node.kind != NodeKind::Deterministic) {
        throw InputError(fmt::format("node '{}' is not deterministic", node.id));
    }
    if (parent_states.size() != node.parents.size()) {
        throw InputError(fmt::format("node '{}' expects {} parent states, got {}", node.id,
                                     node.parents.size(), parent_states.size()));
    }
    const auto it = node.det_map.find(parent_states);
    if (it == node.det_map.end()) {
        throw ModelError(fmt::format("deterministic node '{}' has no entry for {}", node.id, join(parent_states)));
    }
    return it->second;
}

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [&](double x, double y) { return close(x, y, tol); });
}

bool close(const DistTerm& a, const DistTerm& b, double tol) {
    if (a.family() != b.family() || !close(a.scale, b.scale, tol)) {
        return false;
    }
    if (a.family() == Family::Triangular) {
        const auto& x = std::get<TriangularParams>(a.params);
        const auto& y = std::get<TriangularParams>(b.params);
        return close(x.min, y.min, tol) && close(x.mode, y.mode, tol) && close(x.max, y.max, tol);
    }
    const auto& x = std::get<LognormalParams>(a.params);
    const auto& y = std::get<LognormalParams>(b.params);
    return close(x.mu, y.mu, tol) && close(x.sigma, y.sigma, tol);
}

}  // namespace

bool structurally_equal(const Network& a, const Network& b, double tol) {
    if (a.name() != b.name() || a.nodes().size() != b.nodes().size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const Node& x = a.nodes()[i];
        const Node& y = b.nodes()[i];
        if (x.id != y.id || x.kind != y.kind || x.parents != y.parents || x.states != y.states ||
            x.det_map != y.det_map || !close(x.prior, y.prior, tol) || x.cpt.size() != y.cpt.size()) {
            return false;
        }
        for (const auto& [key, row] : x.cpt) {
            const auto it = y.cpt.find(key);
            if (it == y.cpt.end() || !close(row, it->second, tol)) {
                return false;
            }
        }
        if (x.expr.terms.size() != y.expr.terms.size()) {
            return false;
        }
        for (std::size_t t = 0; t < x.expr.terms.size(); ++t) {
            const ChooseTerm& ct = x.expr.terms[t];
            const ChooseTerm& cu = y.expr.terms[t];
            if (ct.selector != cu.selector || ct.branches.size() != cu.branches.size()) {
                return false;
            }
            for (std::size_t k = 0; k < ct.branches.size(); ++k) {
                if (!close(ct.branches[k], cu.branches[k], tol)) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace promobn
