#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prices/data_model.hpp"
#include "prices/kernels.hpp"
#include "prices/regression.hpp"

namespace prices::imputation {

inline constexpr const char* kModelVersion = "engel-quadratic-1";

/// Values whose expected count beyond |z| under a normal with the sample
/// mean and sd (n - 1) is below one half.
std::vector<bool> chauvenet_outliers(std::span<const double> values);

struct IncomeCalibration {
    std::vector<double> values;
    std::vector<bool> outlier;
    double source_mean = 0.0;  // non-outlier subsample
    double source_sd = 0.0;
    double scale = 1.0;
    double shift = 0.0;  // calibrated = shift + scale * value

    std::size_t outliers() const;
};

/// Affine map taking the non-outlier subsample to the target mean and sd;
/// outliers follow the same map.
IncomeCalibration calibrate_income(std::span<const double> income, double target_mean, double target_sd);

/// Mean and sample sd (n - 1).
std::pair<double, double> mean_sd(std::span<const double> values);

/// Demographic covariates shared by the survey and the income dataset.
struct CovariateSpec {
    bool size_bands = true;                          // size_3_5, size_6p (base 1-2)
    std::vector<std::string> indicators = {"urban"}; // demo_ columns used as-is
    bool head_age_bands = true;                      // head_age_35_54, head_age_55p (base < 35)

    std::vector<std::string> names() const;
    /// Throws DataError naming the record when a covariate is missing.
    std::vector<double> values(const HouseholdRecord& h) const;
};

/// [const, ln_income, demographics]
regression::Design total_expenditure_design(std::span<const HouseholdRecord> records,
                                            std::span<const double> income, const CovariateSpec& spec);
/// [const, ln_x, ln_x_sq, demographics]
regression::Design engel_design(std::span<const HouseholdRecord> records, std::span<const double> total,
                                const CovariateSpec& spec);

/// Seed of one record's generators, derived from the run seed and the id.
std::uint64_t record_seed(std::uint64_t run_seed, const std::string& id);
/// Independent stream for one draw sequence of a record.
std::uint64_t stream_seed(std::uint64_t record_seed, std::uint64_t stream);

/// ln x = fitted predictor + normal disturbance with the fit's residual
/// moments. Uses the records' disposable income.
std::vector<double> impute_total_expenditure(std::span<const HouseholdRecord> records,
                                             const regression::RegressionFit& fit, const CovariateSpec& spec,
                                             std::uint64_t seed,
                                             kernels::Execution exec = kernels::Execution::parallel);

/// Ranks records by probability (stable on record order) and switches on the
/// highest ranked until their weight reaches target_share of the total.
std::vector<int> impute_participation(std::span<const double> probability, std::span<const double> weights,
                                      double target_share);

/// Floors negative predictions at zero, zeroes non-participating
/// categories and rescales to sum to one.
std::vector<double> impute_budget_shares(std::span<const double> predicted, std::span<const int> indicator,
                                         const std::string& record_id = "");

struct ImputationOptions {
    CovariateSpec covariates;
    regression::Link link = regression::Link::logit;
    double min_income = 1.0;  // calibrated incomes below this are raised to it
    std::uint64_t seed = 0;
    kernels::Execution exec = kernels::Execution::parallel;
};

struct ImputationModel {
    CovariateSpec covariates;
    IncomeCalibration calibration;
    std::size_t floored_incomes = 0;
    regression::RegressionFit total;
    std::vector<double> target_share;  // weighted participation share per category
    std::vector<std::optional<regression::BinaryFit>> participation;  // empty when share is 0 or 1
    std::vector<std::optional<regression::RegressionFit>> shares;     // empty when nobody buys
};

/// Calibrates survey income to the income dataset, then fits total
/// expenditure, participation and conditional budget share equations.
ImputationModel estimate_model(std::span<const HouseholdRecord> survey, std::span<const HouseholdRecord> income_data,
                               const ImputationOptions& options);

struct ImputationResult {
    ImputationModel model;
    std::vector<HouseholdRecord> records;  // income dataset with imputed expenditure
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<int>> participation;  // indicator per record and category
    std::size_t floored_participants = 0;  // d = 1 but the share floored to zero
};

ImputationResult impute(std::span<const HouseholdRecord> survey, std::span<const HouseholdRecord> income_data,
                        const ImputationOptions& options);

/// imp_flag, imp_seed, imp_model_version
std::vector<ExtraColumn> provenance_columns(const ImputationResult& result);

}  // namespace prices::imputation
