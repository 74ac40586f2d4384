#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promobn/network.hpp"

namespace promobn {

enum class PromoType { None, InStore, Catalogue };
enum class Location { Gondola, Fixture };

std::string_view to_string(PromoType type) noexcept;
std::string_view to_string(Location location) noexcept;
std::optional<PromoType> parse_promo_type(std::string_view text);
std::optional<Location> parse_location(std::string_view text);

// One week of retailer data.
struct WeeklyRecord {
    std::chrono::year_month_day week_start;
    double actual_units = 0.0;
    double retailer_forecast_units = 0.0;
    PromoType promo_type = PromoType::None;
    double price = 0.0;
    Location location = Location::Gondola;

    bool operator==(const WeeklyRecord&) const = default;
};

// Catalogue promotions put the product on a fixture, everything else on the
// gondola; unit counts are non-negative.
std::optional<std::string> check_record(const WeeklyRecord& record);

inline constexpr std::string_view kSalesCsvHeader =
    "week_start,actual_units,retailer_forecast_units,promo_type,price,location";

// Records sorted by week. Errors name the offending row (1-based, header
// excluded).
std::vector<WeeklyRecord> load_sales_csv(const std::string& path);
std::vector<WeeklyRecord> parse_sales_csv(std::istream& in);
void write_sales_csv(std::ostream& out, std::span<const WeeklyRecord> records);

enum class Series { Actual, Forecast };

// Per-promotion-type series with Tukey outliers removed inside each
// category. All three categories are present; empty ones map to {}.
std::map<PromoType, std::vector<double>> split_categories(std::span<const WeeklyRecord> records, Series series);

struct CategoryStats {
    std::string category;
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0;  // n - 1 denominator
};

CategoryStats category_stats(std::string category, std::span<const double> series);

// 100 * |forecast - actual| / actual.
double mape(double forecast, double actual);

// Moments of the retailer's cleaned data, per promotion category.
struct CategoryTarget {
    PromoType type;
    std::size_t count;
    double actual_mean;
    double actual_sd;
    double forecast_mean;
    double forecast_sd;
};

inline constexpr CategoryTarget kTable1Targets[] = {
    {PromoType::None, 39, 15.92, 4.4, 15.92, 4.84},
    {PromoType::InStore, 7, 90.54, 52.54, 100.7, 59.16},
    {PromoType::Catalogue, 41, 312.89, 88.0, 326.98, 105.09},
};

// Overall row of the same table (all 87 weeks).
inline constexpr double kTable1OverallActualMean = 163.51;
inline constexpr double kTable1OverallForecastMean = 159.42;

// 87 weekly records starting 2016-12-26 whose per-category actual and
// forecast series have exactly the kTable1Targets counts, means and SDs.
// Different seeds give different values with the same moments.
std::vector<WeeklyRecord> generate_synthetic(std::uint64_t seed);

// Driver states that correspond to each promotion category.
struct CategoryBinding {
    std::string driver = "Promotions";
    std::string none = "NoPromotion";
    std::string instore = "InStore";
    std::string catalogue = "Catalogue";

    const std::string& state_for(PromoType type) const;
};

struct Table3Row {
    std::string period;
    std::optional<std::string> evidence;  // clamped driver state; nullopt for overall
    std::size_t weeks = 0;
    double actual_mean = 0.0;
    double retailer_mean = 0.0;
    double retailer_mape = 0.0;
    double bn_mean = 0.0;
    double bn_ci_lower = 0.0;
    double bn_ci_upper = 0.0;
    double bn_mape = 0.0;
};

struct Table3Report {
    std::string network;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<Table3Row> rows;
    std::vector<std::string> notes;
};

// Retailer and BN accuracy per sales period: MAPE of the period means, the
// BN mean from an n-iteration run (clamped to the category's driver state,
// unclamped for the overall row) and its 95% CI.
Table3Report table3_report(std::span<const WeeklyRecord> records, const Network& net, std::size_t n,
                           std::uint64_t seed, unsigned workers = 1, const CategoryBinding& binding = {});

std::string format_table3_text(const Table3Report& report);
std::string table3_json(const Table3Report& report);

}  // namespace promobn
