#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "prices/data_model.hpp"

namespace prices::fixtures {

/// Two-sector economy: Z = [[20,30],[40,10]], d = (50,50), x = (100,100),
/// F = (10,30).
MrioTable io2();

/// Three goods at unit prices, quantities (50,30,20), C = 100, budget
/// elasticities (0.8, 1.0, 1.5), xi = -1.5.
struct LesFixture {
    std::vector<double> prices;
    std::vector<double> quantities;
    std::vector<double> budget_elasticities;
    double total = 0.0;
    double xi = 0.0;
};
LesFixture les();

/// Synthetic survey over the canonical categories.
///
/// Generating process, per household (one mt19937_64 stream, fixed seed):
///   size     = 1 + Binomial(9, 0.45)
///   urban    ~ Bernoulli(0.4)
///   head_age ~ UniformInt(22, 75)
///   ln y     = 9.5 + 0.08 size + 0.25 urban + N(0, 0.55^2)        income
///   ln x     = 0.6 + 0.92 ln y + 0.03 size - 0.05 urban + N(0, 0.15^2)
///   category c is bought with probability logistic(a_c + b_c (ln x - 9.8));
///     food always, alcohol and childcare never
///   raw share = max(0, alpha_c + beta_c t + gamma_c t^2 + N(0, sigma_c^2)),
///     t = ln x - 9.8, for bought categories; shares normalised to one
/// Finally each summary group's spending is rescaled by a common factor so
/// that the aggregate group shares are (0.417, 0.047, 0.007, 0.529), and
/// amounts are rounded to cents. All weights are one.
struct HouseholdFixtureOptions {
    std::size_t households = 500;
    std::uint64_t seed = 20180701;
};
std::vector<HouseholdRecord> households(HouseholdFixtureOptions options = {});

/// Aggregate summary-group shares and price changes of the 2018 inflation
/// episode (food, motor fuels, domestic energy and electricity, other).
std::vector<double> summary_shares();
std::vector<double> summary_rates();

/// Per-category relatives: each category takes its summary group's rate.
std::vector<double> summary_relatives(const CategorySet& categories);

/// Canonical categories onto the two fixture sectors: food on s1, fuels
/// and electricity on s2, everything else split evenly.
BridgingMatrix bridge(const CategorySet& categories);

/// Fuel prices per physical unit with standard carbon contents.
FuelTable fuels();

/// Fuels burnt directly by households, per category id.
std::map<std::string, std::string> direct_fuel_map();

/// Writes a complete input bundle plus run configurations into dir:
/// households.csv, income.csv, mrio_*.csv, bridge.csv, fuels.csv,
/// prices.csv, inflation.cfg and carbon.cfg.
void write_bundle(const std::filesystem::path& dir);

}  // namespace prices::fixtures
