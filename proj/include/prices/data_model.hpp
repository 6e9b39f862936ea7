#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prices {

struct Category {
    std::string id;
    std::string label;
};

/// Ordered expenditure classification. Every per-category vector in the
/// library is indexed in this order.
class CategorySet {
public:
    CategorySet() = default;
    explicit CategorySet(std::vector<Category> categories);

    /// The 19-category classification used by the household budget survey
    /// (food ... durables). Alcohol and childcare are kept even though the
    /// survey records no spending on them.
    static CategorySet canonical();
    static CategorySet from_ids(const std::vector<std::string>& ids);

    std::size_t size() const noexcept { return items_.size(); }
    const Category& operator[](std::size_t i) const { return items_.at(i); }
    std::span<const Category> items() const noexcept { return items_; }
    std::optional<std::size_t> index_of(const std::string& id) const;
    std::size_t require(const std::string& id) const;

    bool operator==(const CategorySet& o) const;

private:
    std::vector<Category> items_;
};

/// High-level aggregation of categories used by the summary tables
/// (food / motor fuels / domestic energy and electricity / other).
struct ExpenditureGroups {
    std::vector<std::string> names;
    std::vector<std::size_t> group_of;  // per category

    std::size_t size() const noexcept { return names.size(); }
    static ExpenditureGroups summary(const CategorySet& categories);
    /// One group per category.
    static ExpenditureGroups identity(const CategorySet& categories);
};

struct HouseholdRecord {
    std::string id;
    double weight = 1.0;
    int size = 1;
    std::map<std::string, double> demographics;
    std::vector<double> expenditure;
    std::optional<double> disposable_income;

    double total_expenditure() const;
    std::vector<double> budget_shares() const;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t dropped_zero_expenditure = 0;
    std::vector<std::string> dropped_ids;
    std::vector<std::string> ignored_columns;
};

struct SurveyLoad {
    std::vector<HouseholdRecord> records;
    LoadReport report;
};

struct SurveyLoadOptions {
    /// Expenditure columns must all be present; zero-total rows are dropped.
    /// Disable for income datasets that carry no expenditure.
    bool require_expenditure = true;
};

SurveyLoad load_household_survey(const std::filesystem::path& path, const CategorySet& categories,
                                 SurveyLoadOptions options = {});
SurveyLoad parse_household_survey(const std::string& text, const CategorySet& categories,
                                  SurveyLoadOptions options = {}, const std::string& source = "<memory>");

/// Extra per-record columns appended after the survey schema.
struct ExtraColumn {
    std::string name;
    std::vector<std::string> values;
};

std::string format_household_survey(std::span<const HouseholdRecord> records, const CategorySet& categories,
                                    std::span<const ExtraColumn> extra = {});
void write_household_survey(const std::filesystem::path& path, std::span<const HouseholdRecord> records,
                            const CategorySet& categories, std::span<const ExtraColumn> extra = {});

enum class Origin { domestic, imported };

struct MrioTable {
    std::vector<std::string> sectors;
    Eigen::MatrixXd flows;         // Z, currency
    Eigen::VectorXd final_demand;  // d
    Eigen::VectorXd output;        // x
    Eigen::VectorXd emissions;     // F, tonnes CO2
    std::vector<Origin> origin;

    std::size_t size() const noexcept { return sectors.size(); }

    /// Checks dimensions, sign constraints and x_i = sum_j Z_ij + d_i.
    /// Throws DataError naming the worst sector when the identity fails.
    void validate(double relative_tolerance = 1e-6) const;
    /// max_i |x_i - sum_j Z_ij - d_i| / x_i
    double identity_residual() const;
};

struct MrioPaths {
    std::filesystem::path flows, final_demand, output, emissions;
    static MrioPaths in_directory(const std::filesystem::path& dir);
};

MrioTable load_mrio(const MrioPaths& paths, double relative_tolerance = 1e-6);
void write_mrio(const MrioTable& t, const std::filesystem::path& dir);

/// Row-stochastic categories x industry-products use-share matrix.
struct BridgingMatrix {
    std::vector<std::string> categories;
    std::vector<std::string> products;
    Eigen::MatrixXd shares;

    void validate() const;
};

BridgingMatrix load_bridge(const std::filesystem::path& path, const CategorySet& categories);
void write_bridge(const BridgingMatrix& b, const std::filesystem::path& path);

struct IndirectTax {
    double vat = 0.0;
    double advalorem = 0.0;
    double excise = 0.0;  // currency per unit
    double base_price = 1.0;
};

enum class RecyclingScheme { none, lump_sum_per_household, per_capita, targeted_bottom_q };

struct PriceScenario {
    /// Observed price change per category (0.4289 = +42.89%).
    std::vector<double> relatives;
    /// Optional extra cost per currency of output, per sector.
    std::optional<Eigen::VectorXd> sector_cost_shock;
    double carbon_tax = 0.0;  // currency per tonne CO2
    double passthrough = 1.0;
    bool border_adjustment = false;
    std::vector<IndirectTax> taxes;  // per category; empty = untaxed
    RecyclingScheme recycling = RecyclingScheme::none;
    int targeted_groups = 1;  // bottom q of k groups for targeted recycling

    void validate(std::size_t categories) const;
};

std::vector<double> load_prices(const std::filesystem::path& path, const CategorySet& categories);
std::vector<IndirectTax> load_taxes(const std::filesystem::path& path, const CategorySet& categories);

struct Fuel {
    std::string name;
    double price = 0.0;           // currency per physical unit
    double kgco2_per_unit = 0.0;  // kg CO2 per physical unit
};

struct FuelTable {
    std::vector<Fuel> fuels;

    const Fuel* find(const std::string& name) const;
    void validate() const;
};

FuelTable load_fuels(const std::filesystem::path& path);
void write_fuels(const FuelTable& f, const std::filesystem::path& path);

}  // namespace prices
