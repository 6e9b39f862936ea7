#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prices/data_model.hpp"
#include "prices/demand.hpp"
#include "prices/distribution.hpp"
#include "prices/io_engine.hpp"
#include "prices/kernels.hpp"
#include "prices/regression.hpp"

namespace prices::scenario {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Configuration

/// Run configuration read from a flat `key = value` file with dotted
/// section prefixes (input., scenario., elasticity., distribution.,
/// imputation., run.). Paths are relative to the file's directory.
struct RunConfig {
    std::filesystem::path base_dir;

    std::filesystem::path households;
    std::filesystem::path income;
    std::filesystem::path mrio;  // directory with mrio_z/d/x/f.csv
    std::filesystem::path bridge;
    std::filesystem::path fuels;
    std::filesystem::path prices;
    std::filesystem::path taxes;
    std::filesystem::path taxes_post;
    std::filesystem::path sector_shock;

    double carbon_tax = 0.0;
    double passthrough = 1.0;
    bool border_adjustment = false;
    RecyclingScheme recycling = RecyclingScheme::none;
    int targeted_groups = 1;
    std::map<std::string, std::string> direct_fuel;  // category id -> fuel

    demand::ElasticityOptions elasticity;

    std::size_t groups = 5;
    dist::EquivalenceScale equivalence = dist::EquivalenceScale::square_root;
    double welfare_epsilon = 1.0;
    double atkinson_epsilon = 2.0;

    regression::Link link = regression::Link::logit;
    double min_income = 1.0;

    std::uint64_t seed = 0;
    bool impute = false;
    std::filesystem::path output = "out";
    kernels::Execution execution = kernels::Execution::parallel;

    /// Canonical key/value pairs, sorted, excluding the output directory.
    std::map<std::string, std::string> effective() const;
    /// FNV-1a over the effective configuration, 16 hex digits.
    std::string hash() const;
    /// Value ranges and existence of referenced files.
    void validate() const;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".",
                       const std::string& source = "<memory>");
RunConfig load_config(const std::filesystem::path& path);

std::string to_string(RecyclingScheme scheme);
RecyclingScheme parse_recycling(const std::string& tag);

// ---------------------------------------------------------------------------
// Price formation

/// p = (p_producer + excise)(1 + advalorem)(1 + vat), relative to the same
/// formula at the base producer price.
double consumer_price_relative(double producer_relative, const IndirectTax& tax);
/// Relative change when the tax schedule also moves from `before` to
/// `after` (base price taken from `before`).
double consumer_price_relative(double producer_relative, const IndirectTax& before, const IndirectTax& after);

/// Category-level prices of a carbon tax.
struct CarbonPrices {
    Eigen::VectorXd sector_shock;     // currency per currency of output
    Eigen::VectorXd producer;         // producer price relative per sector
    std::vector<double> bridged;      // producer relative per category
    std::vector<double> indirect;     // consumer relative per category
    std::vector<double> direct;       // direct fuel tax per currency spent
    std::vector<double> producer_share;  // producer value per currency of consumer spending
    std::vector<double> relatives() const;  // indirect + direct
};

struct CarbonInputs {
    const MrioTable* mrio = nullptr;
    const BridgingMatrix* bridge = nullptr;
    const FuelTable* fuels = nullptr;
    std::map<std::string, std::string> direct_fuel;
    std::vector<IndirectTax> taxes;  // empty = untaxed
    double passthrough = 1.0;
    bool border_adjustment = false;
    std::optional<Eigen::VectorXd> extra_shock;
};

CarbonPrices carbon_prices(double rate, const CarbonInputs& in, const CategorySet& categories,
                           kernels::Execution exec = kernels::Execution::parallel);

struct CarbonScenario {
    CarbonPrices prices;
    std::vector<double> household_revenue;
    double revenue = 0.0;
};

/// Prices plus tax collected per household: spending valued at producer
/// prices times the producer relative, plus direct fuel tax.
CarbonScenario carbon_tax_scenario(double rate, const CarbonInputs& in, std::span<const HouseholdRecord> households,
                                   const CategorySet& categories,
                                   kernels::Execution exec = kernels::Execution::parallel);

/// (1 + a)(1 + b) - 1 per category.
std::vector<double> compose_relatives(std::span<const double> a, std::span<const double> b);

/// Transfers per household with sum_h weight * transfer == revenue exactly
/// under kernels::weighted_sum. `group` and `bottom` select the eligible
/// households for the targeted scheme (group index < bottom).
std::vector<double> recycle_revenue(double revenue, RecyclingScheme scheme,
                                    std::span<const HouseholdRecord> households,
                                    std::span<const std::size_t> group = {}, int bottom = 1);

// ---------------------------------------------------------------------------
// Household evaluation

struct HouseholdResult {
    std::string id;
    double weight = 0.0;
    int size = 1;
    std::size_t group = 0;  // expenditure quantile, 0-based
    double total = 0.0;
    double equivalised = 0.0;
    std::vector<double> expenditure;   // per category
    std::vector<double> contribution;  // per summary group, w_g * pi_g
    double inflation = 0.0;
    double burden = 0.0;
    double transfer = 0.0;
    double cv_gross = 0.0;
    double cv_net = 0.0;
    double ye_pre = 0.0;
    double ye_post = 0.0;
    double ye_pre_eq = 0.0;
    double ye_post_eq = 0.0;
    double footprint_before = 0.0;
    double footprint_after = 0.0;
    double xi = 0.0;
    std::size_t elasticity_group = 0;
};

/// Everything the per-household stage reads. Immutable while evaluating.
struct EvaluationInputs {
    const CategorySet* categories = nullptr;
    const ExpenditureGroups* groups = nullptr;
    std::span<const HouseholdRecord> households;
    std::span<const std::size_t> quantile;
    const demand::ElasticityModel* elasticities = nullptr;
    demand::ElasticityOptions elasticity_options;
    std::vector<double> relatives;  // consumer price relative per category
    std::vector<double> transfers;  // per household
    const io::FootprintModel* footprint = nullptr;
    dist::EquivalenceScale equivalence = dist::EquivalenceScale::square_root;
};

/// Inflation, CV, equivalent income and footprints per household. The
/// parallel path returns the same bits as the serial one.
std::vector<HouseholdResult> evaluate_households(const EvaluationInputs& in, kernels::Execution exec);

// ---------------------------------------------------------------------------
// Tables

struct TableOptions {
    double welfare_epsilon = 1.0;
    double atkinson_epsilon = 2.0;
    std::size_t groups = 5;
};

/// File name -> CSV text for the table analogues.
using TableSet = std::map<std::string, std::string>;

TableSet build_tables(std::span<const HouseholdResult> households, const CategorySet& categories,
                      const ExpenditureGroups& groups, const TableOptions& options);

std::string format_household_results(std::span<const HouseholdResult> households, const CategorySet& categories,
                                     const ExpenditureGroups& groups);
std::vector<HouseholdResult> parse_household_results(const std::string& text, const CategorySet& categories,
                                                     const ExpenditureGroups& groups,
                                                     const std::string& source = "<memory>");
std::vector<HouseholdResult> load_household_results(const std::filesystem::path& path, const CategorySet& categories,
                                                    const ExpenditureGroups& groups);

// ---------------------------------------------------------------------------
// Pipeline

struct ScenarioResult {
    RunConfig config;
    CategorySet categories;
    ExpenditureGroups groups;
    LoadReport load;
    std::size_t imputed = 0;
    std::vector<double> relatives;
    std::optional<CarbonPrices> carbon;
    double revenue = 0.0;
    demand::ElasticityModel elasticities;
    std::vector<HouseholdResult> households;
    TableSet tables;
};

ScenarioResult run_scenario(const RunConfig& config);

/// Writes the tables, households.csv, elasticities.csv and manifest.json.
/// Returns the file names written.
std::vector<std::string> emit_reports(const ScenarioResult& result, const std::filesystem::path& dir);

std::string manifest_json(const RunConfig& config, const std::map<std::string, std::string>& facts,
                          const std::vector<std::string>& files);

/// Recomputes every table from a stored households.csv.
TableSet report_from_results(const std::filesystem::path& households_csv, const RunConfig& config);

void write_tables(const TableSet& tables, const std::filesystem::path& dir);

}  // namespace prices::scenario
