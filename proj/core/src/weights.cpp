#include "promobn/weights.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "compiled.hpp"
#include "promobn/error.hpp"
#include "promobn/inference.hpp"

namespace promobn {

namespace {

struct StateSelection {
    std::vector<std::size_t> branch;  // per Choose term
};

// For each driver state, the branch each Choose term selects.
std::vector<StateSelection> selections(const Network& net, const detail::CompiledModel& model,
                                       const std::string& driver) {
    std::vector<StateSelection> out;
    for (const std::string& state : net.at(driver).states) {
        const auto configs = detail::enumerate(model, net, {{driver, state}});
        StateSelection sel;
        for (const auto& term : model.terms) {
            const std::size_t b = configs.front().states[term.selector_slot];
            for (const auto& c : configs) {
                if (c.states[term.selector_slot] != b) {
                    throw UnsupportedShapeError(
                        fmt::format("{}={} does not determine every Choose selector", driver, state));
                }
            }
            sel.branch.push_back(b);
        }
        out.push_back(std::move(sel));
    }
    return out;
}

}  // namespace

BaseForms unit_base_forms(const Network& net) {
    const detail::CompiledModel model = detail::compile_with_equation(net);
    BaseForms forms;
    forms.driver = find_driver(net);
    forms.states = net.at(forms.driver).states;
    const auto sel = selections(net, model, forms.driver);
    for (const StateSelection& s : sel) {
        double total = 0.0;
        std::size_t heaviest = 0;
        double heaviest_mean = -1.0;
        for (std::size_t t = 0; t < model.terms.size(); ++t) {
            const double m = mean_variance(model.terms[t].branches[s.branch[t]]).mean;
            total += m;
            if (m > heaviest_mean) {
                heaviest_mean = m;
                heaviest = t;
            }
        }
        const DistTerm& branch = model.terms[heaviest].branches[s.branch[heaviest]];
        forms.base.push_back(rescaled(branch, total / heaviest_mean));
    }
    return forms;
}

Network reweight_equation(const Network& net, const std::vector<double>& weights) {
    const detail::CompiledModel model = detail::compile_with_equation(net);
    if (weights.size() != model.terms.size()) {
        throw InputError(fmt::format("expected {} weights (one per Choose term), got {}", model.terms.size(),
                                     weights.size()));
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InputError("weights must be non-negative");
        }
    }
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InputError(fmt::format("weights must sum to 1 (got {:.12g})", sum));
    }

    const BaseForms forms = unit_base_forms(net);
    const auto sel = selections(net, model, forms.driver);

    // Which driver state reaches branch k of term t; two states reaching the
    // same branch must agree on the base form.
    std::vector<std::map<std::size_t, std::size_t>> owner(model.terms.size());
    for (std::size_t s = 0; s < sel.size(); ++s) {
        for (std::size_t t = 0; t < model.terms.size(); ++t) {
            const auto [it, fresh] = owner[t].emplace(sel[s].branch[t], s);
            if (!fresh && !(forms.base[it->second] == forms.base[s])) {
                throw UnsupportedShapeError(
                    fmt::format("branch {} of Choose({}) is shared by driver states with different base forms",
                                sel[s].branch[t] + 1, net.at(model.equation_id).expr.terms[t].selector));
            }
        }
    }

    Network out = net;
    Node* eq = out.find(model.equation_id);
    EquationExpr rebuilt;
    for (std::size_t t = 0; t < eq->expr.terms.size(); ++t) {
        if (weights[t] == 0.0) {
            continue;
        }
        ChooseTerm term = eq->expr.terms[t];
        for (const auto& [branch, state] : owner[t]) {
            term.branches[branch] = rescaled(forms.base[state], weights[t]);
        }
        rebuilt.terms.push_back(std::move(term));
    }
    eq->expr = std::move(rebuilt);
    return out;
}

std::vector<double> weights_by_role(const Network& net, double price, double promotions, double location,
                                    const WeightRoles& roles) {
    const detail::CompiledModel model = detail::compile_with_equation(net);
    const Node& eq = net.at(model.equation_id);
    std::vector<double> out;
    for (const ChooseTerm& term : eq.expr.terms) {
        if (term.selector == roles.price) {
            out.push_back(price);
        } else if (term.selector == roles.promotions) {
            out.push_back(promotions);
        } else if (term.selector == roles.location) {
            out.push_back(location);
        } else {
            throw UnsupportedShapeError(
                fmt::format("Choose({}) has no weight role (expected {}, {} or {})", term.selector, roles.price,
                            roles.promotions, roles.location));
        }
    }
    return out;
}

}  // namespace promobn
