#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "promobn/dist.hpp"

namespace promobn {

enum class NodeKind { Chance, Deterministic, Equation };

std::string_view to_string(NodeKind kind) noexcept;

// Positional branch selection: branches[i] applies when the selector node
// is in its i-th declared state.
struct ChooseTerm {
    std::string selector;
    std::vector<DistTerm> branches;

    bool operator==(const ChooseTerm&) const = default;
};

// Sum of Choose terms; one branch of every term is drawn and the results added.
struct EquationExpr {
    std::vector<ChooseTerm> terms;

    bool operator==(const EquationExpr&) const = default;
};

using StateTuple = std::vector<std::string>;

struct Node {
    std::string id;
    NodeKind kind = NodeKind::Chance;
    std::vector<std::string> parents;
    std::vector<std::string> states;
    std::vector<double> prior;                           // root chance nodes
    std::map<StateTuple, std::vector<double>> cpt;       // non-root chance nodes
    std::map<StateTuple, std::string> det_map;           // deterministic nodes
    EquationExpr expr;                                   // equation nodes

    bool is_discrete() const noexcept { return kind != NodeKind::Equation; }
    std::optional<std::size_t> state_index(std::string_view state) const;

    bool operator==(const Node&) const = default;
};

class Network {
public:
    Network() = default;
    explicit Network(std::string name) : name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::vector<Node>& nodes() noexcept { return nodes_; }

    void add_node(Node node) { nodes_.push_back(std::move(node)); }

    // nullptr when absent.
    const Node* find(std::string_view id) const;
    Node* find(std::string_view id);
    const Node& at(std::string_view id) const;

    // parent -> child pairs in declaration order of the children.
    std::vector<std::pair<std::string, std::string>> edges() const;
    std::vector<std::string> children(std::string_view id) const;

    bool operator==(const Network&) const = default;

private:
    std::string name_;
    std::vector<Node> nodes_;
};

struct Violation {
    std::string node;  // empty for network-level problems
    std::string reason;
};

using ValidationReport = std::vector<Violation>;

inline constexpr double kProbabilityTolerance = 1e-9;

// Lists every violated invariant; an empty report means the network is valid.
ValidationReport validate_network(const Network& net);

// Throws ModelError with the collected reasons when validation fails.
void require_valid(const Network& net);

// Parents before children, ties broken by declaration order. Throws
// ModelError on a cycle or an unresolved parent.
std::vector<std::string> topological_order(const Network& net);

// Looks up the node's own state for a full tuple of parent states (in the
// node's parent order).
const std::string& resolve_deterministic(const Node& node, const StateTuple& parent_states);

// Structural equality with a tolerance on probabilities and distribution
// parameters.
bool structurally_equal(const Network& a, const Network& b, double tol = 1e-9);

}  // namespace promobn
