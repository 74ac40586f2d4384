#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "promobn/rng.hpp"

namespace promobn {

struct TriangularParams {
    double min = 0.0;
    double mode = 0.0;
    double max = 0.0;

    bool operator==(const TriangularParams&) const = default;
};

// Parameters of the underlying normal: mean and SD of ln(X).
struct LognormalParams {
    double mu = 0.0;
    double sigma = 0.0;

    bool operator==(const LognormalParams&) const = default;
};

enum class Family { Triangular, Lognormal };

// A triangular or lognormal distribution multiplied by a positive scalar.
// The scale is kept as written (e.g. `0.25 * Triangular(...)`) rather than
// folded into the parameters.
struct DistTerm {
    std::variant<TriangularParams, LognormalParams> params;
    double scale = 1.0;

    static DistTerm triangular(double min, double mode, double max, double scale = 1.0);
    static DistTerm lognormal(double mu, double sigma, double scale = 1.0);

    Family family() const noexcept {
        return std::holds_alternative<TriangularParams>(params) ? Family::Triangular
                                                                : Family::Lognormal;
    }

    bool operator==(const DistTerm&) const = default;
};

// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> check_term(const DistTerm& term);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

double sample(const DistTerm& term, RandomStream& rng);
double pdf(const DistTerm& term, double x);
double cdf(const DistTerm& term, double x);
Moments mean_variance(const DistTerm& term);

// Support of the scaled variable; the upper bound is +inf for lognormals.
std::pair<double, double> support(const DistTerm& term);

// c * Lognormal(mu, sigma) == Lognormal(mu + ln c, sigma).
LognormalParams scale_lognormal(double mu, double sigma, double c);

// Returns `term` multiplied by c. Lognormal scales are folded into mu;
// triangular scales stay explicit.
DistTerm rescaled(const DistTerm& term, double c);

std::string to_string(const DistTerm& term);

// --- fitting -------------------------------------------------------------

// mu and sigma are the mean and (n-1) standard deviation of ln(samples).
LognormalParams fit_lognormal_log_moments(std::span<const double> samples);

// min/max are the sample extremes; the mode is `mode_hint` when given,
// otherwise the most frequent value after rounding to whole units
// (ties go to the smallest).
TriangularParams fit_triangular(std::span<const double> samples,
                                std::optional<double> mode_hint = std::nullopt);

// --- outliers ------------------------------------------------------------

struct Fences {
    double lower = 0.0;
    double upper = 0.0;
};

// Linear-interpolation ("type 7") quantile of unsorted data, p in [0, 1].
double quantile(std::span<const double> samples, double p);

// Q1 - 1.5 IQR and Q3 + 1.5 IQR.
Fences tukey_fences(std::span<const double> samples);

// Values inside the Tukey fences, in their original order.
std::vector<double> remove_outliers(std::span<const double> samples);

}  // namespace promobn
