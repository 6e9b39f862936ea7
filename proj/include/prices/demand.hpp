#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prices/data_model.hpp"
#include "prices/io_engine.hpp"

namespace prices::demand {

/// eta_i = 1 + (beta_i + 2 gamma_i ln C) / w_i for a quadratic Engel curve
/// w_i = alpha_i + beta_i ln C + gamma_i (ln C)^2.
double budget_elasticity(double share, double beta, double gamma, double log_total);

/// Constants of ln(-xi) = phi - alpha ln(C / ER + G), with the ceiling
/// applied to xi afterwards.
struct FrischParameters {
    double phi = 9.2;
    double alpha = 0.973;
    double offset = 7000.0;
    double cap = -1.3;
};

/// Frisch parameter for consumption per capita per month, clamped so that
/// xi <= cap.
double frisch_parameter(double consumption_per_capita_month, double exchange_rate, FrischParameters params = {});

/// Cross-country alternative: -1/xi = 0.485829 + 0.104019 ln(GDP per capita),
/// with the same ceiling.
double frisch_parameter_gdp(double gdp_per_capita, double cap = -1.3);

/// Own- and cross-price elasticities for directly additive preferences:
/// eta_ij = -eta_i w_j (1 + eta_j / xi) + eta_i delta_ij / xi.
Eigen::MatrixXd price_elasticities(std::span<const double> budget_elasticities, std::span<const double> shares,
                                   double xi);

/// Stone-Geary / linear expenditure system parameters.
struct LesParameters {
    std::vector<double> committed;        // gamma_i, quantities at base price 1
    std::vector<double> marginal_shares;  // phi_i, sum to one

    std::size_t size() const noexcept { return committed.size(); }
    double committed_cost(std::span<const double> prices) const;
};

/// phi_i = eta_i w_i and gamma_i = (eta_ii + 1) x_i / (1 - phi_i). Goods
/// with zero base quantity get phi = gamma = 0. Negative gamma is kept and
/// logged.
LesParameters les_calibrate(std::span<const double> own_price, std::span<const double> budget_elasticities,
                            std::span<const double> shares, std::span<const double> quantities, double total);

/// p_i x_i = p_i gamma_i + phi_i (C - sum_j p_j gamma_j).
std::vector<double> les_demand(std::span<const double> prices, double total, const LesParameters& les);

double indirect_utility(std::span<const double> prices, double total, const LesParameters& les);
double expenditure_function(std::span<const double> prices, double utility, const LesParameters& les);

/// e(p1, v(p0, C)) - C.
double compensating_variation(std::span<const double> p0, std::span<const double> p1, double total,
                              const LesParameters& les);
/// C - e(p0, v(p1, C)).
double equivalent_variation(std::span<const double> p0, std::span<const double> p1, double total,
                            const LesParameters& les);
/// e(p_ref, v(p, C)).
double equivalent_income(std::span<const double> reference_prices, std::span<const double> prices, double total,
                         const LesParameters& les);

struct EmissionsChange {
    double before = 0.0;
    double after = 0.0;
    double delta = 0.0;
};

/// Emissions of the LES bundle before and after a price change, with
/// intensities in tonnes per unit of base-price expenditure.
EmissionsChange behavioural_emissions(std::span<const double> intensity, std::span<const double> p0,
                                      std::span<const double> p1, double total, const LesParameters& les);

/// Same, but valued through a household footprint model (direct fuel use
/// plus embodied emissions).
EmissionsChange behavioural_emissions(const io::FootprintModel& model, std::span<const double> p0,
                                      std::span<const double> p1, double total, const LesParameters& les);

/// LES parameters for one household such that demand at base prices (all
/// ones) reproduces its observed basket. Group budget elasticities are
/// floored at zero and rescaled so that sum_i w_i eta_i = 1 on the
/// household's own shares; own-price elasticities follow from the additive
/// formula with the household's xi.
struct HouseholdCalibration {
    LesParameters les;
    std::vector<double> budget_elasticities;
    double xi = 0.0;
};

HouseholdCalibration calibrate_household(std::span<const double> expenditure,
                                         std::span<const double> group_elasticities, double xi);

// ---------------------------------------------------------------------------
// Elasticity estimation

enum class GroupingKey { none, size_band, demographic };

struct GroupingOptions {
    GroupingKey key = GroupingKey::size_band;
    std::string demographic;  // name when key == demographic
};

/// Expenditure measure on the right-hand side of the Engel curves.
enum class EngelScale { household_total, per_capita_month };

struct ElasticityOptions {
    FrischParameters frisch;
    EngelScale engel_scale = EngelScale::household_total;
    double exchange_rate = 0.0;  // required, no default
    double period_months = 1.0;  // survey expenditure period
    GroupingOptions grouping;
    std::size_t min_group_size = 30;  // smaller bands fall back to the pooled Engel fit
};

/// Budget elasticities and xi for one cell (expenditure quantile x
/// demographic band).
struct ElasticityGroup {
    std::string label;
    std::vector<double> budget_elasticities;
    std::vector<double> mean_shares;
    double mean_total = 0.0;
    double mean_per_capita_month = 0.0;
    double xi = 0.0;
};

struct ElasticityModel {
    std::vector<ElasticityGroup> groups;
    std::vector<std::size_t> group_of;  // per household
    std::size_t floored = 0;            // negative budget elasticities set to zero
};

/// Fits quadratic Engel curves per demographic band (pooled across
/// quantiles) and evaluates eta at each cell's mean log expenditure.
ElasticityModel estimate_elasticities(std::span<const HouseholdRecord> households,
                                      std::span<const std::size_t> quantile_group, const ElasticityOptions& options);

double frisch_for_household(const HouseholdRecord& h, const ElasticityOptions& options);

/// CSV with columns category, eta, eta_own, phi, gamma, xi, group.
std::string format_elasticity_table(const ElasticityModel& model, const CategorySet& categories);

}  // namespace prices::demand
