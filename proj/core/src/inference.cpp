#include "promobn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "compiled.hpp"
#include "promobn/error.hpp"
#include "promobn/rng.hpp"
#include "promobn/weights.hpp"

namespace promobn {

namespace detail {

std::size_t CompiledModel::slot(std::string_view id) const {
    for (std::size_t i = 0; i < discrete.size(); ++i) {
        if (discrete[i].id == id) {
            return i;
        }
    }
    throw InputError(fmt::format("unknown discrete node '{}'", id));
}

CompiledModel compile(const Network& net) {
    require_valid(net);
    CompiledModel model;
    const auto order = topological_order(net);
    std::map<std::string, std::size_t> slots;
    for (const std::string& id : order) {
        const Node& node = net.at(id);
        if (!node.is_discrete()) {
            continue;
        }
        CompiledDiscrete c;
        c.id = id;
        c.kind = node.kind;
        c.declaration = static_cast<std::size_t>(&node - net.nodes().data());
        c.n_states = node.states.size();
        std::vector<const Node*> parents;
        for (const std::string& p : node.parents) {
            c.parent_slots.push_back(slots.at(p));
            parents.push_back(&net.at(p));
        }
        // Mixed radix, last parent varying fastest.
        c.strides.assign(parents.size(), 1);
        std::size_t rows = 1;
        for (std::size_t i = parents.size(); i-- > 0;) {
            c.strides[i] = rows;
            rows *= parents[i]->states.size();
        }
        StateTuple tuple(parents.size());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < parents.size(); ++i) {
                tuple[i] = parents[i]->states[(r / c.strides[i]) % parents[i]->states.size()];
            }
            if (node.kind == NodeKind::Chance) {
                const std::vector<double>& p = parents.empty() ? node.prior : node.cpt.at(tuple);
                c.probs.insert(c.probs.end(), p.begin(), p.end());
            } else {
                c.mapped.push_back(static_cast<std::uint16_t>(*node.state_index(node.det_map.at(tuple))));
            }
        }
        slots[id] = model.discrete.size();
        model.discrete.push_back(std::move(c));
    }
    for (const Node& node : net.nodes()) {
        if (node.kind != NodeKind::Equation) {
            continue;
        }
        if (++model.equation_count > 1) {
            continue;
        }
        model.equation_id = node.id;
        for (const ChooseTerm& t : node.expr.terms) {
            model.terms.push_back({slots.at(t.selector), t.branches});
        }
    }
    return model;
}

CompiledModel compile_with_equation(const Network& net) {
    CompiledModel model = compile(net);
    if (model.equation_count == 0) {
        throw UnsupportedShapeError("network has no equation node");
    }
    if (model.equation_count > 1) {
        throw UnsupportedShapeError("network has more than one equation node");
    }
    return model;
}

std::vector<Configuration> enumerate(const CompiledModel& model, const Network& net,
                                     const DiscreteEvidence& evidence) {
    std::vector<int> observed(model.discrete.size(), -1);
    for (const auto& [id, state] : evidence) {
        const Node* node = net.find(id);
        if (node == nullptr || !node->is_discrete()) {
            throw InputError(fmt::format("evidence names unknown discrete node '{}'", id));
        }
        const auto idx = node->state_index(state);
        if (!idx) {
            throw InputError(fmt::format("node '{}' has no state '{}'", id, state));
        }
        observed[model.slot(id)] = static_cast<int>(*idx);
    }

    std::vector<Configuration> out;
    std::vector<std::uint16_t> states(model.discrete.size(), 0);
    std::function<void(std::size_t, double)> visit = [&](std::size_t slot, double weight) {
        if (slot == model.discrete.size()) {
            out.push_back({states, weight});
            return;
        }
        const CompiledDiscrete& node = model.discrete[slot];
        const std::size_t row = node.row(states);
        if (node.kind == NodeKind::Deterministic) {
            const std::uint16_t s = node.mapped[row];
            if (observed[slot] >= 0 && observed[slot] != s) {
                return;
            }
            states[slot] = s;
            visit(slot + 1, weight);
            return;
        }
        for (std::size_t s = 0; s < node.n_states; ++s) {
            if (observed[slot] >= 0 && observed[slot] != static_cast<int>(s)) {
                continue;
            }
            const double p = node.probs[row * node.n_states + s];
            if (p <= 0.0) {
                continue;
            }
            states[slot] = static_cast<std::uint16_t>(s);
            visit(slot + 1, weight * p);
        }
    };
    visit(0, 1.0);
    if (out.empty()) {
        throw InconsistentEvidenceError("evidence has zero probability under the network");
    }
    return out;
}

}  // namespace detail

namespace {

using detail::CompiledModel;
using detail::Configuration;
using detail::compile_with_equation;
using detail::compile;
using detail::enumerate;

double sum_selected_means(const CompiledModel& model, const std::vector<std::uint16_t>& states) {
    double total = 0.0;
    for (const auto& term : model.terms) {
        total += mean_variance(term.branches[states[term.selector_slot]]).mean;
    }
    return total;
}

std::vector<std::size_t> branch_tuple(const CompiledModel& model, const std::vector<std::uint16_t>& states) {
    std::vector<std::size_t> tuple;
    tuple.reserve(model.terms.size());
    for (const auto& term : model.terms) {
        tuple.push_back(states[term.selector_slot]);
    }
    return tuple;
}

// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <class Body>
void parallel_chunks(std::size_t n, unsigned workers, Body&& body) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (w == 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t begin = k * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        threads.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

double draw_equation(const CompiledModel& model, const std::vector<std::uint16_t>& states, RandomStream& rng) {
    double value = 0.0;
    for (const auto& term : model.terms) {
        value += sample(term.branches[states[term.selector_slot]], rng);
    }
    return value;
}

// Probability masses of one branch on grid points origin + k * step; each
// point holds the mass of the cell centred on it.
struct GridDensity {
    double origin = 0.0;
    double step = 1.0;
    std::vector<double> mass;

    double density(double x) const {
        const double t = (x - origin) / step;
        if (t < 0.0 || mass.empty()) {
            return 0.0;
        }
        const auto k = static_cast<std::size_t>(std::floor(t));
        if (k + 1 >= mass.size()) {
            return k + 1 == mass.size() && t == static_cast<double>(k) ? mass[k] / step : 0.0;
        }
        const double f = t - static_cast<double>(k);
        return ((1.0 - f) * mass[k] + f * mass[k + 1]) / step;
    }
};

GridDensity discretise(const DistTerm& term, double step) {
    const Moments m = mean_variance(term);
    const double lo = std::floor(std::min(0.0, support(term).first) / step) * step;
    const double hi = m.mean + 12.0 * std::sqrt(m.variance);
    const auto points = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
    GridDensity g{lo, step, std::vector<double>(points, 0.0)};
    double total = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
        const double x = lo + step * static_cast<double>(k);
        g.mass[k] = cdf(term, x + step / 2.0) - cdf(term, x - step / 2.0);
        total += g.mass[k];
    }
    for (double& v : g.mass) {
        v /= total;
    }
    return g;
}

GridDensity convolve(const GridDensity& a, const GridDensity& b) {
    GridDensity out{a.origin + b.origin, a.step, std::vector<double>(a.mass.size() + b.mass.size() - 1, 0.0)};
    for (std::size_t i = 0; i < a.mass.size(); ++i) {
        const double ai = a.mass[i];
        if (ai == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < b.mass.size(); ++j) {
            out.mass[i + j] += ai * b.mass[j];
        }
    }
    return out;
}

GridDensity sum_density(const CompiledModel& model, const std::vector<std::size_t>& tuple, double step) {
    GridDensity acc = discretise(model.terms[0].branches[tuple[0]], step);
    for (std::size_t t = 1; t < model.terms.size(); ++t) {
        acc = convolve(acc, discretise(model.terms[t].branches[tuple[t]], step));
    }
    return acc;
}

std::uint64_t tuple_seed(std::uint64_t seed, const std::vector<std::size_t>& tuple) {
    std::uint64_t s = derive_seed(seed, tuple.size());
    for (std::size_t b : tuple) {
        s = derive_seed(s, b);
    }
    return s;
}

double kde_density(const CompiledModel& model, const std::vector<std::size_t>& tuple, double value,
                   double bandwidth, const PosteriorOptions& options) {
    const std::size_t n = options.kde_samples;
    if (n == 0) {
        throw InputError("KDE needs at least one sample");
    }
    const std::uint64_t seed = tuple_seed(options.seed, tuple);
    std::vector<double> draws(n);
    parallel_chunks(n, options.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(derive_seed(seed, i));
            double v = 0.0;
            for (std::size_t t = 0; t < model.terms.size(); ++t) {
                v += sample(model.terms[t].branches[tuple[t]], rng);
            }
            draws[i] = v;
        }
    });
    // Summed serially so the result is independent of the worker count.
    double acc = 0.0;
    for (double x : draws) {
        const double z = (value - x) / bandwidth;
        acc += std::exp(-0.5 * z * z);
    }
    return acc / (static_cast<double>(n) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
}

PosteriorReport marginals(const CompiledModel& model, const Network& net, const std::vector<Configuration>& configs,
                          const std::vector<double>& weights, PosteriorMethod method) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    PosteriorReport report;
    report.method = method;
    std::vector<std::size_t> slot_of_declared;
    for (const Node& node : net.nodes()) {
        if (!node.is_discrete()) {
            continue;
        }
        report.nodes.push_back({node.id, node.states, std::vector<double>(node.states.size(), 0.0)});
        slot_of_declared.push_back(model.slot(node.id));
    }
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const double w = weights[c] / total;
        for (std::size_t k = 0; k < report.nodes.size(); ++k) {
            report.nodes[k].probabilities[configs[c].states[slot_of_declared[k]]] += w;
        }
    }
    return report;
}

}  // namespace

void check_evidence(const Network& net, const Evidence& evidence) {
    for (const auto& [id, state] : evidence.discrete) {
        const Node* node = net.find(id);
        if (node == nullptr) {
            throw InputError(fmt::format("evidence names unknown node '{}'", id));
        }
        if (!node->is_discrete()) {
            throw InputError(fmt::format("node '{}' is continuous; observe it with a value", id));
        }
        if (!node->state_index(state)) {
            throw InputError(fmt::format("node '{}' has no state '{}'", id, state));
        }
    }
    if (evidence.continuous) {
        const ContinuousEvidence& c = *evidence.continuous;
        const Node* node = net.find(c.node);
        if (node == nullptr) {
            throw InputError(fmt::format("evidence names unknown node '{}'", c.node));
        }
        if (node->kind != NodeKind::Equation) {
            throw InputError(fmt::format("node '{}' is discrete; observe it with a state", c.node));
        }
        if (!std::isfinite(c.value)) {
            throw InputError("continuous evidence value must be finite");
        }
        if (!(c.bandwidth > 0.0)) {
            throw InputError("bandwidth must be > 0");
        }
    }
}

SampleSet forward_sample(const Network& net, std::size_t n, std::uint64_t seed, const DiscreteEvidence& evidence,
                         unsigned workers) {
    if (n < 1) {
        throw InputError("forward sampling needs n >= 1");
    }
    check_evidence(net, Evidence{evidence, std::nullopt});
    const CompiledModel model = compile_with_equation(net);
    const std::size_t slots = model.discrete.size();

    std::vector<int> clamp(slots, -1);
    bool roots_only = true;
    for (const auto& [id, state] : evidence) {
        const std::size_t s = model.slot(id);
        const auto& node = model.discrete[s];
        if (node.kind != NodeKind::Chance || !node.parent_slots.empty()) {
            roots_only = false;
        }
        clamp[s] = static_cast<int>(*net.at(id).state_index(state));
    }

    // Evidence below the roots: draw the discrete part from the exact
    // posterior instead of clamping (clamping would be an intervention).
    std::vector<Configuration> configs;
    std::vector<double> cumulative;
    if (!roots_only) {
        configs = detail::enumerate(model, net, evidence);
        double acc = 0.0;
        for (const auto& c : configs) {
            acc += c.weight;
            cumulative.push_back(acc);
        }
        for (double& c : cumulative) {
            c /= acc;
        }
    }

    SampleSet out;
    out.n = n;
    out.seed = seed;
    out.equation_node = model.equation_id;
    out.values.assign(n, 0.0);
    out.state_trace.assign(n * slots, 0);
    for (const auto& d : model.discrete) {
        out.discrete_nodes.push_back(d.id);
    }

    parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint16_t> states(slots, 0);
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(derive_seed(seed, i));
            if (roots_only) {
                for (std::size_t s = 0; s < slots; ++s) {
                    const auto& node = model.discrete[s];
                    const std::size_t row = node.row(states);
                    if (node.kind == NodeKind::Deterministic) {
                        states[s] = node.mapped[row];
                        continue;
                    }
                    const double u = rng.uniform();
                    if (clamp[s] >= 0) {
                        states[s] = static_cast<std::uint16_t>(clamp[s]);
                        continue;
                    }
                    const double* p = &node.probs[row * node.n_states];
                    std::size_t pick = node.n_states - 1;
                    double acc = 0.0;
                    for (std::size_t k = 0; k < node.n_states; ++k) {
                        acc += p[k];
                        if (u < acc) {
                            pick = k;
                            break;
                        }
                    }
                    // Never land on a zero-probability tail state through rounding.
                    while (pick > 0 && p[pick] == 0.0) {
                        --pick;
                    }
                    states[s] = static_cast<std::uint16_t>(pick);
                }
            } else {
                const double u = rng.uniform();
                const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                const std::size_t c = std::min<std::size_t>(it - cumulative.begin(), configs.size() - 1);
                states = configs[c].states;
            }
            out.values[i] = draw_equation(model, states, rng);
            std::copy(states.begin(), states.end(), out.state_trace.begin() + static_cast<std::ptrdiff_t>(i * slots));
        }
    });
    return out;
}

MeanCI mean_ci(std::span<const double> values) {
    if (values.size() < 2) {
        throw InsufficientDataError("a confidence interval needs at least 2 samples");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    MeanCI out;
    out.mean = mean;
    out.sd = std::sqrt(ss / (n - 1.0));
    out.se = out.sd / std::sqrt(n);
    out.lower = mean - 1.96 * out.se;
    out.upper = mean + 1.96 * out.se;
    return out;
}

MeanCI equation_mean_ci(const SampleSet& samples) { return mean_ci(samples.values); }

std::string find_driver(const Network& net) {
    std::vector<std::string> roots;
    for (const Node& node : net.nodes()) {
        if (node.kind == NodeKind::Chance && node.parents.empty()) {
            roots.push_back(node.id);
        }
    }
    if (roots.size() != 1) {
        throw UnsupportedShapeError(
            fmt::format("expected exactly one root chance node to drive the model, found {}", roots.size()));
    }
    return roots.front();
}

double analytic_state_mean(const Network& net, std::string_view driver, std::string_view state) {
    const CompiledModel model = compile_with_equation(net);
    const auto configs = detail::enumerate(model, net, {{std::string(driver), std::string(state)}});
    const auto tuple = branch_tuple(model, configs.front().states);
    for (const auto& c : configs) {
        if (branch_tuple(model, c.states) != tuple) {
            throw UnsupportedShapeError(
                fmt::format("{}={} does not determine every Choose selector of '{}'", driver, state, model.equation_id));
        }
    }
    return sum_selected_means(model, configs.front().states);
}

double analytic_mean(const Network& net, const DiscreteEvidence& evidence) {
    const CompiledModel model = compile_with_equation(net);
    const auto configs = detail::enumerate(model, net, evidence);
    double total = 0.0;
    double mean = 0.0;
    for (const auto& c : configs) {
        total += c.weight;
        mean += c.weight * sum_selected_means(model, c.states);
    }
    return mean / total;
}

std::string_view to_string(PosteriorMethod method) noexcept {
    switch (method) {
        case PosteriorMethod::ExactEnumeration:
            return "exact-enumeration";
        case PosteriorMethod::ConvolutionDensity:
            return "convolution-density";
        case PosteriorMethod::MonteCarloKde:
            return "monte-carlo-kde";
    }
    return "unknown";
}

PosteriorMethod parse_method(std::string_view name) {
    if (name == "exact" || name == "exact-enumeration") {
        return PosteriorMethod::ExactEnumeration;
    }
    if (name == "convolution" || name == "convolution-density") {
        return PosteriorMethod::ConvolutionDensity;
    }
    if (name == "kde" || name == "monte-carlo-kde") {
        return PosteriorMethod::MonteCarloKde;
    }
    throw InputError(fmt::format("unknown posterior method '{}' (use exact, convolution or kde)", name));
}

double NodePosterior::of(std::string_view state) const {
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i] == state) {
            return probabilities[i];
        }
    }
    throw InputError(fmt::format("node '{}' has no state '{}'", node, state));
}

const NodePosterior& PosteriorReport::at(std::string_view node) const {
    for (const auto& n : nodes) {
        if (n.node == node) {
            return n;
        }
    }
    throw InputError(fmt::format("report has no node '{}'", node));
}

PosteriorReport discrete_posterior_exact(const Network& net, const DiscreteEvidence& evidence) {
    check_evidence(net, Evidence{evidence, std::nullopt});
    const CompiledModel model = detail::compile(net);
    const auto configs = detail::enumerate(model, net, evidence);
    std::vector<double> weights;
    weights.reserve(configs.size());
    for (const auto& c : configs) {
        weights.push_back(c.weight);
    }
    return marginals(model, net, configs, weights, PosteriorMethod::ExactEnumeration);
}

double conditional_density_oracle(const Network& net, const DiscreteEvidence& given, double value, double grid_step) {
    if (!(grid_step > 0.0)) {
        throw InputError("grid step must be > 0");
    }
    const CompiledModel model = compile_with_equation(net);
    const auto configs = detail::enumerate(model, net, given);
    const auto tuple = branch_tuple(model, configs.front().states);
    for (const auto& c : configs) {
        if (branch_tuple(model, c.states) != tuple) {
            throw UnsupportedShapeError("evidence does not determine every Choose selector");
        }
    }
    return sum_density(model, tuple, grid_step).density(value);
}

PosteriorReport posterior(const Network& net, const Evidence& evidence, PosteriorMethod method,
                          const PosteriorOptions& options) {
    check_evidence(net, evidence);
    if (!evidence.continuous) {
        return discrete_posterior_exact(net, evidence.discrete);
    }
    if (method == PosteriorMethod::ExactEnumeration) {
        throw InputError("exact enumeration cannot condition on continuous evidence; use convolution or kde");
    }
    if (!(options.grid_step > 0.0)) {
        throw InputError("grid step must be > 0");
    }
    const CompiledModel model = compile_with_equation(net);
    const auto configs = detail::enumerate(model, net, evidence.discrete);
    const ContinuousEvidence& obs = *evidence.continuous;

    std::map<std::vector<std::size_t>, double> density;
    std::vector<double> weights;
    weights.reserve(configs.size());
    for (const auto& c : configs) {
        const auto tuple = branch_tuple(model, c.states);
        auto it = density.find(tuple);
        if (it == density.end()) {
            const double d = method == PosteriorMethod::ConvolutionDensity
                                 ? sum_density(model, tuple, options.grid_step).density(obs.value)
                                 : kde_density(model, tuple, obs.value, obs.bandwidth, options);
            it = density.emplace(tuple, d).first;
        }
        weights.push_back(c.weight * it->second);
    }
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) {
        throw UndefinedPosteriorError(fmt::format(
            "every configuration gives zero density to {}={}; the posterior is undefined", obs.node, obs.value));
    }
    return marginals(model, net, configs, weights, method);
}

PosteriorReport posterior_given_equation_evidence(const Network& net, double value, PosteriorMethod method,
                                                  const PosteriorOptions& options, double bandwidth) {
    const CompiledModel model = compile_with_equation(net);
    Evidence evidence;
    evidence.continuous = ContinuousEvidence{model.equation_id, value, bandwidth};
    return posterior(net, evidence, method, options);
}

std::vector<SensitivityRow> sensitivity_weights(const Network& net,
                                                const std::vector<std::pair<double, double>>& splits,
                                                std::size_t n, std::uint64_t seed, unsigned workers) {
    constexpr double kPriceWeight = 0.25;
    std::vector<SensitivityRow> rows;
    for (const auto& [wp, wl] : splits) {
        if (wp < 0.0 || wl < 0.0 || std::abs(wp + wl - (1.0 - kPriceWeight)) > 1e-9) {
            throw InputError(fmt::format("weights ({}, {}) must be non-negative and sum to 0.75", wp, wl));
        }
        const Network rebuilt = reweight_equation(net, weights_by_role(net, kPriceWeight, wp, wl));
        const MeanCI ci = equation_mean_ci(forward_sample(rebuilt, n, seed, {}, workers));
        rows.push_back({wp, wl, ci.mean, ci.se, analytic_mean(rebuilt)});
    }
    return rows;
}

}  // namespace promobn
