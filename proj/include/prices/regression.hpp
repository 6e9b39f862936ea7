#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prices/error.hpp"

namespace prices::regression {

/// Named covariate matrix, one row per observation.
struct Design {
    std::vector<std::string> names;
    Eigen::MatrixXd x;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
    std::size_t cols() const noexcept { return names.size(); }
};

/// Raised when design columns are linearly dependent on the estimation sample.
class RankDeficientError : public DataError {
public:
    RankDeficientError(const std::string& what, std::vector<std::string> columns)
        : DataError("imputation", what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

struct RegressionFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    double residual_mean = 0.0;
    double residual_variance = 0.0;
    std::size_t n_obs = 0;

    double predict(const Eigen::RowVectorXd& row) const { return row.dot(coefficients); }
};

/// Weighted least squares. Observations with zero weight are ignored.
RegressionFit wls_fit(const Design& design, std::span<const double> y, std::span<const double> weights);

enum class Link { logit, probit };

struct BinaryFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;  // zero for dropped columns
    std::vector<std::string> dropped;
    Link link = Link::logit;
    int iterations = 0;
    double log_likelihood = 0.0;

    double probability(const Eigen::RowVectorXd& row) const;
};

double link_cdf(Link link, double z);

/// Weighted maximum-likelihood binary response model fitted by Fisher
/// scoring until the gradient max-norm drops below 1e-8. Collinear columns
/// are dropped and listed in `dropped`; complete separation raises
/// NumericalError.
BinaryFit binary_fit(const Design& design, std::span<const double> indicator, std::span<const double> weights,
                     Link link = Link::logit);

double log_likelihood(const Design& design, std::span<const double> indicator, std::span<const double> weights,
                      Link link, const Eigen::VectorXd& coefficients);

}  // namespace prices::regression
