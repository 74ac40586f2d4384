#include "promobn/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "format.hpp"
#include "promobn/error.hpp"

namespace promobn {

namespace {

double tri_pdf(const TriangularParams& t, double x) {
    if (x < t.min || x > t.max) {
        return 0.0;
    }
    const double width = t.max - t.min;
    if (x < t.mode) {
        return 2.0 * (x - t.min) / (width * (t.mode - t.min));
    }
    if (x > t.mode) {
        return 2.0 * (t.max - x) / (width * (t.max - t.mode));
    }
    return 2.0 / width;
}

double tri_cdf(const TriangularParams& t, double x) {
    if (x <= t.min) {
        return 0.0;
    }
    if (x >= t.max) {
        return 1.0;
    }
    const double width = t.max - t.min;
    if (x <= t.mode) {
        return (x - t.min) * (x - t.min) / (width * (t.mode - t.min));
    }
    return 1.0 - (t.max - x) * (t.max - x) / (width * (t.max - t.mode));
}

double tri_quantile(const TriangularParams& t, double u) {
    const double width = t.max - t.min;
    const double split = (t.mode - t.min) / width;
    if (u < split) {
        return t.min + std::sqrt(u * width * (t.mode - t.min));
    }
    return t.max - std::sqrt((1.0 - u) * width * (t.max - t.mode));
}

double ln_pdf(const LognormalParams& l, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    const double z = (std::log(x) - l.mu) / l.sigma;
    return std::exp(-0.5 * z * z) / (x * l.sigma * std::sqrt(2.0 * std::numbers::pi));
}

double ln_cdf(const LognormalParams& l, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    return 0.5 * std::erfc(-(std::log(x) - l.mu) / (l.sigma * std::numbers::sqrt2));
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_valid(const DistTerm& term) {
    if (auto why = check_term(term)) {
        throw DomainError(*why);
    }
}

}  // namespace

DistTerm DistTerm::triangular(double min, double mode, double max, double scale) {
    DistTerm t{TriangularParams{min, mode, max}, scale};
    require_valid(t);
    return t;
}

DistTerm DistTerm::lognormal(double mu, double sigma, double scale) {
    DistTerm t{LognormalParams{mu, sigma}, scale};
    require_valid(t);
    return t;
}

std::optional<std::string> check_term(const DistTerm& term) {
    if (!(term.scale > 0.0) || !std::isfinite(term.scale)) {
        return "scale must be a positive finite number";
    }
    return std::visit(
        overloaded{
            [](const TriangularParams& t) -> std::optional<std::string> {
                if (!std::isfinite(t.min) || !std::isfinite(t.mode) || !std::isfinite(t.max)) {
                    return "triangular parameters must be finite";
                }
                if (!(t.min <= t.mode && t.mode <= t.max)) {
                    return "triangular requires min <= mode <= max";
                }
                if (!(t.min < t.max)) {
                    return "triangular requires min < max";
                }
                return std::nullopt;
            },
            [](const LognormalParams& l) -> std::optional<std::string> {
                if (!std::isfinite(l.mu)) {
                    return "lognormal mu must be finite";
                }
                if (!(l.sigma > 0.0) || !std::isfinite(l.sigma)) {
                    return "lognormal sigma must be > 0";
                }
                return std::nullopt;
            }},
        term.params);
}

double sample(const DistTerm& term, RandomStream& rng) {
    return std::visit(
        overloaded{[&](const TriangularParams& t) { return term.scale * tri_quantile(t, rng.uniform()); },
                   [&](const LognormalParams& l) {
                       return term.scale * std::exp(l.mu + l.sigma * rng.standard_normal());
                   }},
        term.params);
}

double pdf(const DistTerm& term, double x) {
    const double c = term.scale;
    return std::visit(overloaded{[&](const TriangularParams& t) { return tri_pdf(t, x / c) / c; },
                                 [&](const LognormalParams& l) { return ln_pdf(l, x / c) / c; }},
                      term.params);
}

double cdf(const DistTerm& term, double x) {
    const double c = term.scale;
    return std::visit(overloaded{[&](const TriangularParams& t) { return tri_cdf(t, x / c); },
                                 [&](const LognormalParams& l) { return ln_cdf(l, x / c); }},
                      term.params);
}

Moments mean_variance(const DistTerm& term) {
    const double c = term.scale;
    const Moments unit = std::visit(
        overloaded{[](const TriangularParams& t) {
                       const double a = t.min;
                       const double m = t.mode;
                       const double b = t.max;
                       return Moments{(a + m + b) / 3.0,
                                      (a * a + m * m + b * b - a * m - a * b - m * b) / 18.0};
                   },
                   [](const LognormalParams& l) {
                       const double s2 = l.sigma * l.sigma;
                       return Moments{std::exp(l.mu + s2 / 2.0),
                                      std::expm1(s2) * std::exp(2.0 * l.mu + s2)};
                   }},
        term.params);
    return {c * unit.mean, c * c * unit.variance};
}

std::pair<double, double> support(const DistTerm& term) {
    const double c = term.scale;
    return std::visit(
        overloaded{[&](const TriangularParams& t) { return std::pair{c * t.min, c * t.max}; },
                   [](const LognormalParams&) {
                       return std::pair{0.0, std::numeric_limits<double>::infinity()};
                   }},
        term.params);
}

LognormalParams scale_lognormal(double mu, double sigma, double c) {
    if (!(c > 0.0)) {
        throw DomainError("lognormal scale factor must be > 0");
    }
    if (!(sigma > 0.0)) {
        throw DomainError("lognormal sigma must be > 0");
    }
    return {mu + std::log(c), sigma};
}

DistTerm rescaled(const DistTerm& term, double c) {
    if (!(c > 0.0)) {
        throw DomainError("scale factor must be > 0");
    }
    return std::visit(
        overloaded{[&](const TriangularParams& t) { return DistTerm{t, term.scale * c}; },
                   [&](const LognormalParams& l) {
                       return DistTerm{scale_lognormal(l.mu, l.sigma, term.scale * c), 1.0};
                   }},
        term.params);
}

std::string to_string(const DistTerm& term) {
    using detail::format_number;
    std::string body = std::visit(
        overloaded{[](const TriangularParams& t) {
                       return "Triangular(" + format_number(t.min) + ", " + format_number(t.mode) +
                              ", " + format_number(t.max) + ")";
                   },
                   [](const LognormalParams& l) {
                       return "Lognormal(" + format_number(l.mu) + ", " + format_number(l.sigma) + ")";
                   }},
        term.params);
    if (term.scale != 1.0) {
        return format_number(term.scale) + " * " + body;
    }
    return body;
}

LognormalParams fit_lognormal_log_moments(std::span<const double> samples) {
    if (samples.size() < 2) {
        throw InsufficientDataError("lognormal fit needs at least 2 samples");
    }
    std::vector<double> logs;
    logs.reserve(samples.size());
    for (double x : samples) {
        if (!(x > 0.0)) {
            throw DomainError("lognormal fit requires strictly positive samples");
        }
        logs.push_back(std::log(x));
    }
    const double n = static_cast<double>(logs.size());
    const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : logs) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) {
        throw DomainError("degenerate lognormal fit: log-samples have zero spread");
    }
    return {mean, sd};
}

TriangularParams fit_triangular(std::span<const double> samples, std::optional<double> mode_hint) {
    if (samples.size() < 3) {
        throw InsufficientDataError("triangular fit needs at least 3 samples");
    }
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    const double min = *lo;
    const double max = *hi;
    if (!(min < max)) {
        throw DomainError("degenerate triangular fit: all samples equal");
    }
    double mode = 0.0;
    if (mode_hint) {
        if (*mode_hint < min || *mode_hint > max) {
            throw DomainError("mode hint lies outside the sample range");
        }
        mode = *mode_hint;
    } else {
        std::map<long long, int> counts;
        for (double x : samples) {
            ++counts[std::llround(x)];
        }
        // std::map iterates ascending, so strict > keeps the smallest tie.
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) {
                best = it;
            }
        }
        mode = std::clamp(static_cast<double>(best->first), min, max);
    }
    return {min, mode, max};
}

double quantile(std::span<const double> samples, double p) {
    if (samples.empty()) {
        throw InsufficientDataError("quantile of empty sample");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Fences tukey_fences(std::span<const double> samples) {
    if (samples.size() < 4) {
        throw InsufficientDataError("Tukey fences need at least 4 samples");
    }
    const double q1 = quantile(samples, 0.25);
    const double q3 = quantile(samples, 0.75);
    const double iqr = q3 - q1;
    return {q1 - 1.5 * iqr, q3 + 1.5 * iqr};
}

std::vector<double> remove_outliers(std::span<const double> samples) {
    const Fences f = tukey_fences(samples);
    std::vector<double> kept;
    kept.reserve(samples.size());
    std::copy_if(samples.begin(), samples.end(), std::back_inserter(kept),
                 [&](double x) { return x >= f.lower && x <= f.upper; });
    return kept;
}

}  // namespace promobn
