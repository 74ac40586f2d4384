#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "promobn/network.hpp"

namespace promobn {

// Observed states of discrete nodes, keyed by node id.
using DiscreteEvidence = std::map<std::string, std::string>;

inline constexpr double kDefaultBandwidth = 5.0;
inline constexpr double kDefaultGridStep = 0.25;

// Point observation of an equation node, in sales units.
struct ContinuousEvidence {
    std::string node;
    double value = 0.0;
    double bandwidth = kDefaultBandwidth;
};

struct Evidence {
    DiscreteEvidence discrete;
    std::optional<ContinuousEvidence> continuous;

    bool empty() const noexcept { return discrete.empty() && !continuous; }
};

// Checks node/state names and the bandwidth; throws InputError.
void check_evidence(const Network& net, const Evidence& evidence);

struct SampleSet {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string equation_node;
    std::vector<double> values;
    // Discrete node ids in sampling (topological) order.
    std::vector<std::string> discrete_nodes;
    // Row-major n x discrete_nodes.size() state indices.
    std::vector<std::uint16_t> state_trace;

    std::uint16_t state_at(std::size_t iteration, std::size_t node) const {
        return state_trace[iteration * discrete_nodes.size() + node];
    }
};

// Draws n forward samples of the network's equation node. Iteration i uses
// its own random stream derived from (seed, i), so the result does not
// depend on `workers`. Evidence on root chance nodes clamps them; evidence
// elsewhere makes the discrete part come from the exact posterior.
SampleSet forward_sample(const Network& net, std::size_t n, std::uint64_t seed,
                         const DiscreteEvidence& evidence = {}, unsigned workers = 1);

struct MeanCI {
    double mean = 0.0;
    double sd = 0.0;  // sample SD, n - 1 denominator
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// mean +- 1.96 sd / sqrt(n).
MeanCI equation_mean_ci(const SampleSet& samples);
MeanCI mean_ci(std::span<const double> values);

// The unique root chance node that drives every other discrete node.
std::string find_driver(const Network& net);

// Sum of the closed-form means of the branches selected when `driver` is in
// `state`. Throws UnsupportedShapeError unless that state fixes every
// Choose selector.
double analytic_state_mean(const Network& net, std::string_view driver, std::string_view state);

// Closed-form mean of the equation node under the exact discrete posterior.
double analytic_mean(const Network& net, const DiscreteEvidence& evidence = {});

enum class PosteriorMethod { ExactEnumeration, ConvolutionDensity, MonteCarloKde };

std::string_view to_string(PosteriorMethod method) noexcept;
// Accepts "exact", "convolution", "kde" and the long names.
PosteriorMethod parse_method(std::string_view name);

struct NodePosterior {
    std::string node;
    std::vector<std::string> states;
    std::vector<double> probabilities;

    double of(std::string_view state) const;
};

struct PosteriorReport {
    PosteriorMethod method = PosteriorMethod::ExactEnumeration;
    std::vector<NodePosterior> nodes;  // discrete nodes, declaration order

    const NodePosterior& at(std::string_view node) const;
};

// Marginals of every discrete node by enumerating the joint discrete space.
PosteriorReport discrete_posterior_exact(const Network& net, const DiscreteEvidence& evidence = {});

struct PosteriorOptions {
    double grid_step = kDefaultGridStep;
    std::size_t kde_samples = 100000;
    std::uint64_t seed = 42;
    unsigned workers = 1;
};

// Density of the equation node at `value` given discrete evidence that fixes
// every selector. Each selected branch is discretised on a uniform grid over
// [min(0, support), mean + 12 SD] and the grids are convolved.
double conditional_density_oracle(const Network& net, const DiscreteEvidence& given, double value,
                                  double grid_step = kDefaultGridStep);

// Posterior of every discrete node given discrete and (optionally) continuous
// evidence. Continuous evidence weights each discrete configuration by the
// conditional density of the observed value: by grid convolution or by a
// Gaussian KDE over per-configuration samples.
PosteriorReport posterior(const Network& net, const Evidence& evidence, PosteriorMethod method,
                          const PosteriorOptions& options = {});

PosteriorReport posterior_given_equation_evidence(const Network& net, double value, PosteriorMethod method,
                                                  const PosteriorOptions& options = {},
                                                  double bandwidth = kDefaultBandwidth);

struct SensitivityRow {
    double w_promotions = 0.0;
    double w_location = 0.0;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    double analytic_mean = 0.0;
};

// Rebuilds the equation with price weight 0.25 and each (promotions,
// location) split, then reports the overall mean by Monte Carlo and in
// closed form. Each split must sum to 0.75.
std::vector<SensitivityRow> sensitivity_weights(const Network& net,
                                                const std::vector<std::pair<double, double>>& splits,
                                                std::size_t n = 10000, std::uint64_t seed = 42,
                                                unsigned workers = 1);

}  // namespace promobn
