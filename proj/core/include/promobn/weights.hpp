#pragma once

#include <string>
#include <vector>

#include "promobn/network.hpp"

namespace promobn {

// Unit-weight distribution per driver state. Each base form has the same
// family as the heaviest branch selected under that state and a mean equal
// to the state's analytic mean, so any weights summing to 1 preserve it.
struct BaseForms {
    std::string driver;
    std::vector<std::string> states;
    std::vector<DistTerm> base;
};

BaseForms unit_base_forms(const Network& net);

// Replaces every branch reachable from a driver state with its base form
// scaled by the term's weight (one weight per Choose term, in order).
// Weights must be >= 0 and sum to 1; a zero weight drops the term.
Network reweight_equation(const Network& net, const std::vector<double>& weights);

// Selector names behind the price / promotions / location weights.
struct WeightRoles {
    std::string price = "Price";
    std::string promotions = "Promotions";
    std::string location = "ProductLocation";
};

// Orders (price, promotions, location) weights by the equation's Choose terms.
std::vector<double> weights_by_role(const Network& net, double price, double promotions, double location,
                                    const WeightRoles& roles = {});

}  // namespace promobn
