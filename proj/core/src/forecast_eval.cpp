#include "promobn/forecast_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "promobn/dist.hpp"
#include "promobn/error.hpp"
#include "promobn/inference.hpp"
#include "promobn/rng.hpp"

namespace promobn {

namespace {

constexpr std::chrono::year_month_day kFirstWeek{std::chrono::year{2016}, std::chrono::month{12},
                                                 std::chrono::day{26}};
constexpr double kRegularPrice = 4.50;
constexpr int kMaxSyntheticAttempts = 100000;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

std::optional<double> parse_real(std::string_view s) {
    if (s.empty()) {
        return std::nullopt;
    }
    std::string buf(s);
    std::size_t used = 0;
    try {
        const double v = std::stod(buf, &used);
        if (used != buf.size() || !std::isfinite(v)) {
            return std::nullopt;
        }
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    const std::string buf(s);
    if (buf.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return ymd;
}

std::string format_date(const std::chrono::year_month_day& d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                       static_cast<unsigned>(d.day()));
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

// Draws `count` values from `family` and moves them affinely onto the target
// mean and SD. Redraws until the adjusted values are non-negative and free of
// Tukey outliers, so split_categories keeps every one of them.
std::vector<double> matched_series(const DistTerm& family, std::size_t count, double mean, double sd,
                                   RandomStream& rng) {
    for (int attempt = 0; attempt < kMaxSyntheticAttempts; ++attempt) {
        std::vector<double> raw(count);
        for (double& x : raw) {
            x = sample(family, rng);
        }
        const double raw_mean = mean_of(raw);
        const double raw_sd = sd_of(raw);
        if (!(raw_sd > 0.0)) {
            continue;
        }
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = mean + (raw[i] - raw_mean) * sd / raw_sd;
        }
        const bool non_negative = std::all_of(out.begin(), out.end(), [](double x) { return x >= 0.0; });
        if (non_negative && (count < 4 || remove_outliers(out).size() == count)) {
            return out;
        }
    }
    throw Error("could not synthesise a series matching the target moments");
}

DistTerm family_for(PromoType type, double mean, double sd) {
    if (type == PromoType::None) {
        return DistTerm::triangular(9.6, 12.0, 24.0);
    }
    const double s2 = std::log1p(sd * sd / (mean * mean));
    return DistTerm::lognormal(std::log(mean) - s2 / 2.0, std::sqrt(s2));
}

}  // namespace

std::string_view to_string(PromoType type) noexcept {
    switch (type) {
        case PromoType::None:
            return "none";
        case PromoType::InStore:
            return "instore";
        case PromoType::Catalogue:
            return "catalogue";
    }
    return "none";
}

std::string_view to_string(Location location) noexcept {
    return location == Location::Fixture ? "fixture" : "gondola";
}

std::optional<PromoType> parse_promo_type(std::string_view text) {
    if (text == "none") {
        return PromoType::None;
    }
    if (text == "instore") {
        return PromoType::InStore;
    }
    if (text == "catalogue") {
        return PromoType::Catalogue;
    }
    return std::nullopt;
}

std::optional<Location> parse_location(std::string_view text) {
    if (text == "gondola") {
        return Location::Gondola;
    }
    if (text == "fixture") {
        return Location::Fixture;
    }
    return std::nullopt;
}

std::optional<std::string> check_record(const WeeklyRecord& r) {
    if (!r.week_start.ok()) {
        return "invalid week_start date";
    }
    if (!(r.actual_units >= 0.0)) {
        return "actual_units must be >= 0";
    }
    if (!(r.retailer_forecast_units >= 0.0)) {
        return "retailer_forecast_units must be >= 0";
    }
    const Location expected = r.promo_type == PromoType::Catalogue ? Location::Fixture : Location::Gondola;
    if (r.location != expected) {
        return fmt::format("promo_type {} requires location {}", to_string(r.promo_type), to_string(expected));
    }
    return std::nullopt;
}

std::vector<WeeklyRecord> parse_sales_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError("sales CSV is empty; expected a header row");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    if (trim(line) != kSalesCsvHeader) {
        throw InputError(fmt::format("unexpected sales CSV header '{}'; expected '{}'", trim(line), kSalesCsvHeader));
    }
    std::vector<WeeklyRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        ++row;
        const auto fields = split(line, ',');
        auto fail = [&](const std::string& why) -> InputError {
            return InputError(fmt::format("row {}: {}", row, why));
        };
        if (fields.size() != 6) {
            throw fail(fmt::format("expected 6 fields, found {}", fields.size()));
        }
        WeeklyRecord r;
        const auto date = parse_date(fields[0]);
        if (!date) {
            throw fail(fmt::format("bad date '{}' (want YYYY-MM-DD)", fields[0]));
        }
        r.week_start = *date;
        const auto actual = parse_real(fields[1]);
        const auto forecast = parse_real(fields[2]);
        const auto price = parse_real(fields[4]);
        if (!actual || !forecast || !price) {
            throw fail("actual_units, retailer_forecast_units and price must be numbers");
        }
        r.actual_units = *actual;
        r.retailer_forecast_units = *forecast;
        r.price = *price;
        const auto promo = parse_promo_type(fields[3]);
        if (!promo) {
            throw fail(fmt::format("unknown promo_type '{}' (none, instore, catalogue)", fields[3]));
        }
        r.promo_type = *promo;
        const auto location = parse_location(fields[5]);
        if (!location) {
            throw fail(fmt::format("unknown location '{}' (gondola, fixture)", fields[5]));
        }
        r.location = *location;
        if (auto why = check_record(r)) {
            throw fail(*why);
        }
        records.push_back(r);
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const WeeklyRecord& a, const WeeklyRecord& b) { return a.week_start < b.week_start; });
    return records;
}

std::vector<WeeklyRecord> load_sales_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError(fmt::format("cannot open sales CSV '{}'", path));
    }
    try {
        return parse_sales_csv(in);
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", path, e.what()));
    }
}

void write_sales_csv(std::ostream& out, std::span<const WeeklyRecord> records) {
    out << kSalesCsvHeader << '\n';
    for (const WeeklyRecord& r : records) {
        out << fmt::format("{},{:.6f},{:.6f},{},{:.2f},{}\n", format_date(r.week_start), r.actual_units,
                           r.retailer_forecast_units, to_string(r.promo_type), r.price, to_string(r.location));
    }
}

std::map<PromoType, std::vector<double>> split_categories(std::span<const WeeklyRecord> records, Series series) {
    std::map<PromoType, std::vector<double>> out{
        {PromoType::None, {}}, {PromoType::InStore, {}}, {PromoType::Catalogue, {}}};
    for (const WeeklyRecord& r : records) {
        out[r.promo_type].push_back(series == Series::Actual ? r.actual_units : r.retailer_forecast_units);
    }
    for (auto& [type, values] : out) {
        // Fences need four points; smaller categories are kept whole.
        if (values.size() >= 4) {
            values = remove_outliers(values);
        }
    }
    return out;
}

CategoryStats category_stats(std::string category, std::span<const double> series) {
    if (series.size() < 2) {
        throw InsufficientDataError(fmt::format("category '{}' needs at least 2 values for an SD", category));
    }
    return {std::move(category), series.size(), mean_of(series), sd_of(series)};
}

double mape(double forecast, double actual) {
    if (!(actual > 0.0)) {
        throw DomainError("MAPE is undefined for a non-positive actual value");
    }
    return 100.0 * std::abs(forecast - actual) / actual;
}

std::vector<WeeklyRecord> generate_synthetic(std::uint64_t seed) {
    std::vector<PromoType> weeks;
    for (const CategoryTarget& t : kTable1Targets) {
        weeks.insert(weeks.end(), t.count, t.type);
    }
    RandomStream shuffle_rng(derive_seed(seed, 0));
    for (std::size_t i = weeks.size(); i > 1; --i) {
        std::swap(weeks[i - 1], weeks[shuffle_rng.below(i)]);
    }

    std::vector<WeeklyRecord> records(weeks.size());
    std::uint64_t stream = 1;
    for (const CategoryTarget& t : kTable1Targets) {
        RandomStream actual_rng(derive_seed(seed, stream++));
        RandomStream forecast_rng(derive_seed(seed, stream++));
        const auto actual = matched_series(family_for(t.type, t.actual_mean, t.actual_sd), t.count, t.actual_mean,
                                           t.actual_sd, actual_rng);
        const auto forecast = matched_series(family_for(t.type, t.forecast_mean, t.forecast_sd), t.count,
                                             t.forecast_mean, t.forecast_sd, forecast_rng);
        std::size_t k = 0;
        for (std::size_t i = 0; i < weeks.size(); ++i) {
            if (weeks[i] != t.type) {
                continue;
            }
            WeeklyRecord& r = records[i];
            r.promo_type = t.type;
            r.actual_units = actual[k];
            r.retailer_forecast_units = forecast[k];
            ++k;
        }
    }

    RandomStream price_rng(derive_seed(seed, stream));
    const std::chrono::sys_days first{kFirstWeek};
    for (std::size_t i = 0; i < records.size(); ++i) {
        WeeklyRecord& r = records[i];
        r.week_start = std::chrono::year_month_day{first + std::chrono::days{7 * static_cast<int>(i)}};
        r.location = r.promo_type == PromoType::Catalogue ? Location::Fixture : Location::Gondola;
        // Promotional discounts range from 31% to 50%.
        const double discount = r.promo_type == PromoType::None ? 0.0 : 0.31 + 0.19 * price_rng.uniform();
        r.price = std::round(kRegularPrice * (1.0 - discount) * 100.0) / 100.0;
    }
    return records;
}

const std::string& CategoryBinding::state_for(PromoType type) const {
    switch (type) {
        case PromoType::None:
            return none;
        case PromoType::InStore:
            return instore;
        case PromoType::Catalogue:
            return catalogue;
    }
    return none;
}

Table3Report table3_report(std::span<const WeeklyRecord> records, const Network& net, std::size_t n,
                           std::uint64_t seed, unsigned workers, const CategoryBinding& binding) {
    if (records.empty()) {
        throw InsufficientDataError("no sales records to evaluate");
    }
    const auto actual = split_categories(records, Series::Actual);
    const auto forecast = split_categories(records, Series::Forecast);

    Table3Report report;
    report.network = net.name();
    report.n = n;
    report.seed = seed;

    auto make_row = [&](std::string period, std::optional<std::string> evidence, std::span<const double> act,
                        std::span<const double> fc) {
        Table3Row row;
        row.period = std::move(period);
        row.evidence = evidence;
        row.weeks = act.size();
        row.actual_mean = mean_of(act);
        row.retailer_mean = mean_of(fc);
        row.retailer_mape = mape(row.retailer_mean, row.actual_mean);
        DiscreteEvidence ev;
        if (evidence) {
            ev[binding.driver] = *evidence;
        }
        const MeanCI ci = equation_mean_ci(forward_sample(net, n, seed, ev, workers));
        row.bn_mean = ci.mean;
        row.bn_ci_lower = ci.lower;
        row.bn_ci_upper = ci.upper;
        row.bn_mape = mape(row.bn_mean, row.actual_mean);
        return row;
    };

    std::vector<double> all_actual;
    std::vector<double> all_forecast;
    for (const auto& [type, values] : actual) {
        all_actual.insert(all_actual.end(), values.begin(), values.end());
    }
    for (const auto& [type, values] : forecast) {
        all_forecast.insert(all_forecast.end(), values.begin(), values.end());
    }
    report.rows.push_back(make_row("Overall", std::nullopt, all_actual, all_forecast));

    const std::pair<PromoType, const char*> periods[] = {
        {PromoType::None, "No Promotion"},
        {PromoType::InStore, "In-store Promotions"},
        {PromoType::Catalogue, "Catalogue Promotions"},
    };
    for (const auto& [type, label] : periods) {
        const auto& act = actual.at(type);
        if (act.empty()) {
            continue;
        }
        report.rows.push_back(make_row(label, binding.state_for(type), act, forecast.at(type)));
    }

    report.notes = {
        "MAPE = 100 * |f - x| / x applied to period means (x = mean actual weekly sales).",
        "Outliers removed per category with Tukey fences (Q1 - 1.5 IQR, Q3 + 1.5 IQR) before averaging.",
        fmt::format("BN forecasts average {} forward samples (seed {}); categories clamp {}, the overall row "
                    "samples the priors, so its error moves with the run.",
                    n, seed, binding.driver),
    };
    return report;
}

std::string format_table3_text(const Table3Report& report) {
    std::string out = fmt::format("MAPE comparison of retailer forecasts and BN predictions ({}; n={}, seed={})\n",
                                  report.network, report.n, report.seed);
    out += fmt::format("{:<22} {:>5} {:>10} {:>10} {:>9} {:>10} {:>7} {:>22}\n", "Sales period", "weeks", "actual",
                       "retailer", "ret.MAPE", "BN mean", "BN MAPE", "BN 95% CI");
    for (const Table3Row& r : report.rows) {
        out += fmt::format("{:<22} {:>5} {:>10.2f} {:>10.2f} {:>8.2f}% {:>10.2f} {:>6.2f}% {:>22}\n", r.period, r.weeks,
                           r.actual_mean, r.retailer_mean, r.retailer_mape, r.bn_mean, r.bn_mape,
                           fmt::format("({:.2f}, {:.2f})", r.bn_ci_lower, r.bn_ci_upper));
    }
    for (const std::string& note : report.notes) {
        out += "note: " + note + "\n";
    }
    return out;
}

std::string table3_json(const Table3Report& report) {
    nlohmann::ordered_json doc;
    doc["network"] = report.network;
    doc["iterations"] = report.n;
    doc["seed"] = report.seed;
    auto& rows = doc["rows"] = nlohmann::ordered_json::array();
    for (const Table3Row& r : report.rows) {
        nlohmann::ordered_json row;
        row["sales_period"] = r.period;
        row["evidence"] = r.evidence ? nlohmann::ordered_json(*r.evidence) : nlohmann::ordered_json(nullptr);
        row["weeks"] = r.weeks;
        row["actual_mean"] = r.actual_mean;
        row["retailer_forecast_mean"] = r.retailer_mean;
        row["retailer_mape_pct"] = r.retailer_mape;
        row["bn_forecast_mean"] = r.bn_mean;
        row["bn_mape_pct"] = r.bn_mape;
        row["bn_ci95"] = {r.bn_ci_lower, r.bn_ci_upper};
        rows.push_back(std::move(row));
    }
    doc["notes"] = report.notes;
    return doc.dump(2) + "\n";
}

}  // namespace promobn
