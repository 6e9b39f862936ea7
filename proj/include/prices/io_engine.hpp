#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prices/data_model.hpp"
#include "prices/kernels.hpp"

namespace prices::io {

/// Input coefficients a_ij = Z_ij / x_j. Column sums are strictly below one.
struct TechnologyMatrix {
    Eigen::MatrixXd coefficients;
    std::vector<std::string> sectors;

    /// Validates a raw coefficient matrix (nonnegative, column sums < 1).
    static TechnologyMatrix from_coefficients(Eigen::MatrixXd a, std::vector<std::string> sectors = {});
    Eigen::Index size() const noexcept { return coefficients.rows(); }
};

TechnologyMatrix technology_matrix(const MrioTable& table);

enum class LeontiefMethod { direct, neumann };

struct NeumannOptions {
    int max_terms = 10000;
    double tolerance = 1e-12;  // stop once max |A^k| entry falls below this
};

struct LeontiefInverse {
    Eigen::MatrixXd matrix;
    LeontiefMethod method = LeontiefMethod::direct;
    int terms = 0;
    double last_term_norm = 0.0;

    Eigen::Index size() const noexcept { return matrix.rows(); }
};

/// (I - A)^-1, by LU factorisation or by summing I + A + A^2 + ...
/// Singular systems and series that do not converge within the term budget
/// raise NumericalError.
LeontiefInverse leontief_inverse(const TechnologyMatrix& a, LeontiefMethod method = LeontiefMethod::direct,
                                 NeumannOptions options = {},
                                 kernels::Execution exec = kernels::Execution::parallel);

/// Producer price relatives from a per-sector cost shock (currency per
/// currency of output): p_i = rate * sum_j shock_j L_ji. Costs travel
/// forward along the supply chain.
Eigen::VectorXd cost_passthrough(const LeontiefInverse& l, const Eigen::VectorXd& shock, double rate = 1.0,
                                 kernels::Execution exec = kernels::Execution::parallel);

/// Tonnes CO2 per currency unit of output, split by sector origin.
struct CarbonIntensity {
    Eigen::VectorXd total;
    Eigen::VectorXd domestic;
    Eigen::VectorXd imported;
};

CarbonIntensity sector_intensity(const MrioTable& table);

/// Tonnes CO2 per currency of output for an energy industry with the given
/// fuel mix (weights summing to one).
double energy_industry_intensity(const FuelTable& fuels, std::span<const std::pair<std::string, double>> mix);

/// Emissions embodied per currency of final demand, m = s L.
CarbonIntensity embodied_intensity(const LeontiefInverse& l, const CarbonIntensity& s,
                                   kernels::Execution exec = kernels::Execution::parallel);

/// result_j = sum_i v_i B_ij (categories -> industry products).
Eigen::VectorXd bridge_to_industry(const BridgingMatrix& b, std::span<const double> category_vector);

/// Per-category value of a per-product quantity: B * v (products -> categories).
Eigen::VectorXd bridge_to_categories(const BridgingMatrix& b, const Eigen::VectorXd& per_product);

/// Everything needed to compute a household's carbon footprint.
struct FootprintModel {
    Eigen::VectorXd category_intensity;              // t CO2 per currency, after bridging
    std::vector<std::optional<Fuel>> direct_fuel;    // per category: fuel burnt by the household
};

/// Builds a footprint model. direct_map maps category ids to fuel names;
/// a fuel absent from the table raises DataError.
FootprintModel make_footprint_model(const BridgingMatrix& b, const Eigen::VectorXd& embodied_per_product,
                                    const FuelTable& fuels, const std::map<std::string, std::string>& direct_map,
                                    const CategorySet& categories);

struct Footprint {
    double direct = 0.0;    // t CO2
    double indirect = 0.0;  // t CO2
    double total = 0.0;
};

Footprint household_footprint(std::span<const double> expenditure, const FootprintModel& model);
inline Footprint household_footprint(const HouseholdRecord& h, const FootprintModel& model) {
    return household_footprint(h.expenditure, model);
}

}  // namespace prices::io
