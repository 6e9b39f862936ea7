#include "prices/regression.hpp"

#include <cmath>
#include <numbers>

namespace prices::regression {

namespace {

constexpr const char* kModule = "imputation";

struct WeightedRows {
    std::vector<Eigen::Index> rows;  // observations with positive weight
    double total_weight = 0.0;
};

WeightedRows positive_rows(const Design& d, std::span<const double> y, std::span<const double> weights) {
    if (y.size() != d.rows() || weights.size() != d.rows())
        throw DataError(kModule, "design, outcome and weights differ in length");
    if (static_cast<std::size_t>(d.x.cols()) != d.names.size())
        throw DataError(kModule, "design column names do not match the matrix");
    WeightedRows out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw DataError(kModule, "weights must be finite and >= 0");
        if (weights[i] > 0.0) {
            out.rows.push_back(static_cast<Eigen::Index>(i));
            out.total_weight += weights[i];
        }
    }
    if (out.rows.empty()) throw DataError(kModule, "all weights are zero");
    return out;
}

// Indices of columns that are linear combinations of earlier-pivoted ones.
std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& xw) {
    Eigen::MatrixXd scaled = xw;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        const double norm = scaled.col(j).norm();
        if (norm > 0.0) scaled.col(j) /= norm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(1e-10);
    std::vector<Eigen::Index> out;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < scaled.cols(); ++k) out.push_back(perm(k));
    std::sort(out.begin(), out.end());
    return out;
}

double log_cdf(Link link, double z) {
    if (link == Link::logit) return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
    return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
}

double log_ccdf(Link link, double z) { return log_cdf(link, -z); }

double density(Link link, double z) {
    if (link == Link::logit) {
        const double e = std::exp(-std::abs(z));
        return e / ((1.0 + e) * (1.0 + e));
    }
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

RegressionFit wls_fit(const Design& design, std::span<const double> y, std::span<const double> weights) {
    const WeightedRows wr = positive_rows(design, y, weights);
    const auto p = static_cast<Eigen::Index>(design.cols());
    const auto n = static_cast<Eigen::Index>(wr.rows.size());
    if (n <= p)
        throw DataError(kModule, "need more observations (" + std::to_string(n) + ") than covariates (" +
                                     std::to_string(p) + ")");

    Eigen::MatrixXd xw(n, p);
    Eigen::VectorXd yw(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = wr.rows[static_cast<std::size_t>(k)];
        const double s = std::sqrt(weights[static_cast<std::size_t>(i)]);
        xw.row(k) = s * design.x.row(i);
        yw(k) = s * y[static_cast<std::size_t>(i)];
    }

    if (auto dep = dependent_columns(xw); !dep.empty()) {
        std::vector<std::string> names;
        std::string list;
        for (auto j : dep) {
            names.push_back(design.names[static_cast<std::size_t>(j)]);
            list += (list.empty() ? "" : ", ") + names.back();
        }
        throw RankDeficientError("rank-deficient design; collinear columns: " + list, std::move(names));
    }

    RegressionFit fit;
    fit.names = design.names;
    fit.coefficients = xw.colPivHouseholderQr().solve(yw);
    fit.n_obs = static_cast<std::size_t>(n);

    double mean = 0.0;
    for (auto i : wr.rows) {
        const auto ui = static_cast<std::size_t>(i);
        mean += weights[ui] * (y[ui] - design.x.row(i).dot(fit.coefficients));
    }
    mean /= wr.total_weight;
    double var = 0.0;
    for (auto i : wr.rows) {
        const auto ui = static_cast<std::size_t>(i);
        const double e = y[ui] - design.x.row(i).dot(fit.coefficients) - mean;
        var += weights[ui] * e * e;
    }
    fit.residual_mean = mean;
    fit.residual_variance = var / wr.total_weight;
    return fit;
}

double link_cdf(Link link, double z) {
    if (link == Link::logit) return 1.0 / (1.0 + std::exp(-z));
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double BinaryFit::probability(const Eigen::RowVectorXd& row) const { return link_cdf(link, row.dot(coefficients)); }

double log_likelihood(const Design& design, std::span<const double> indicator, std::span<const double> weights,
                      Link link, const Eigen::VectorXd& coefficients) {
    double ll = 0.0;
    for (std::size_t i = 0; i < design.rows(); ++i) {
        if (weights[i] == 0.0) continue;
        const double z = design.x.row(static_cast<Eigen::Index>(i)).dot(coefficients);
        ll += weights[i] * (indicator[i] > 0.5 ? log_cdf(link, z) : log_ccdf(link, z));
    }
    return ll;
}

BinaryFit binary_fit(const Design& design, std::span<const double> indicator, std::span<const double> weights,
                     Link link) {
    const WeightedRows wr = positive_rows(design, indicator, weights);
    bool has0 = false, has1 = false;
    for (auto i : wr.rows) {
        const double v = indicator[static_cast<std::size_t>(i)];
        if (v != 0.0 && v != 1.0) throw DataError(kModule, "binary outcome must be 0 or 1");
        (v > 0.5 ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw DataError(kModule, "binary outcome needs both classes present");

    // Weights rescaled to mean one so the gradient tolerance is per observation.
    const double scale = static_cast<double>(wr.rows.size()) / wr.total_weight;
    std::vector<double> w(weights.begin(), weights.end());
    for (auto& v : w) v *= scale;

    const auto n = static_cast<Eigen::Index>(wr.rows.size());
    Eigen::MatrixXd xw(n, design.x.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = wr.rows[static_cast<std::size_t>(k)];
        xw.row(k) = std::sqrt(w[static_cast<std::size_t>(i)]) * design.x.row(i);
    }
    const auto dep = dependent_columns(xw);

    BinaryFit fit;
    fit.names = design.names;
    fit.link = link;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        if (std::find(dep.begin(), dep.end(), j) != dep.end()) fit.dropped.push_back(design.names[static_cast<std::size_t>(j)]);
        else keep.push_back(j);
    }
    Design reduced;
    reduced.x.resize(design.x.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        reduced.names.push_back(design.names[static_cast<std::size_t>(keep[k])]);
        reduced.x.col(static_cast<Eigen::Index>(k)) = design.x.col(keep[k]);
    }

    const auto p = static_cast<Eigen::Index>(keep.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = log_likelihood(reduced, indicator, w, link, beta);
    constexpr int kMaxIterations = 200;
    bool converged = false;
    for (int it = 0; it < kMaxIterations; ++it) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
        double worst_miss = 0.0;
        for (auto i : wr.rows) {
            const auto ui = static_cast<std::size_t>(i);
            const Eigen::RowVectorXd row = reduced.x.row(i);
            const double z = row.dot(beta);
            const double pr = link_cdf(link, z);
            const double q = link_cdf(link, -z);
            const double f = density(link, z);
            const double y = indicator[ui];
            worst_miss = std::max(worst_miss, std::abs(y - pr));
            const double pq = std::max(pr * q, 1e-300);
            score += (w[ui] * (y * q - (1.0 - y) * pr) * f / pq) * row.transpose();
            info += (w[ui] * f * f / pq) * (row.transpose() * row);
        }
        fit.iterations = it;
        if (score.cwiseAbs().maxCoeff() < 1e-8) {
            converged = true;
            break;
        }
        if (worst_miss < 1e-6)
            throw NumericalError(kModule, "complete separation: the covariates perfectly predict the outcome");
        const Eigen::VectorXd step = info.ldlt().solve(score);
        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double ll_next = log_likelihood(reduced, indicator, w, link, next);
        for (int h = 0; h < 40 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
            t *= 0.5;
            next = beta + t * step;
            ll_next = log_likelihood(reduced, indicator, w, link, next);
        }
        beta = next;
        ll = ll_next;
    }
    if (!converged)
        throw NumericalError(kModule, "binary model did not converge (quasi-separation or ill-conditioned design)");

    fit.coefficients = Eigen::VectorXd::Zero(design.x.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) fit.coefficients(keep[k]) = beta(static_cast<Eigen::Index>(k));
    fit.log_likelihood = log_likelihood(design, indicator, weights, link, fit.coefficients);
    return fit;
}

}  // namespace prices::regression
