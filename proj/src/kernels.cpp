#include "prices/kernels.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prices::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

void matmul_column(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& c, Eigen::Index j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) c(i, j) = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double bkj = b(k, j);
        if (bkj == 0.0) continue;
        for (Eigen::Index i = 0; i < a.rows(); ++i) c(i, j) += a(i, k) * bkj;
    }
}

}  // namespace

Eigen::MatrixXd matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Execution exec) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Eigen::MatrixXd c(a.rows(), b.cols());
    for_each_index(static_cast<std::size_t>(b.cols()), exec,
                   [&](std::size_t j) { matmul_column(a, b, c, static_cast<Eigen::Index>(j)); });
    return c;
}

Eigen::VectorXd transposed_apply(const Eigen::MatrixXd& m, const Eigen::VectorXd& v, Execution exec) {
    if (m.rows() != v.size()) throw std::invalid_argument("transposed_apply: dimension mismatch");
    Eigen::VectorXd y(m.cols());
    for_each_index(static_cast<std::size_t>(m.cols()), exec, [&](std::size_t jj) {
        const auto j = static_cast<Eigen::Index>(jj);
        double s = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) s += v(i) * m(i, j);
        y(j) = s;
    });
    return y;
}

double weighted_sum(std::span<const double> weights, std::span<const double> values) {
    if (weights.size() != values.size()) throw std::invalid_argument("weighted_sum: length mismatch");
    double s = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double term = weights[i] * values[i];
        const double t = s + term;
        if (std::abs(s) >= std::abs(term)) comp += (s - t) + term;
        else comp += (term - t) + s;
        s = t;
    }
    return s + comp;
}

double sum(std::span<const double> values) {
    double s = 0.0, comp = 0.0;
    for (double v : values) {
        const double t = s + v;
        if (std::abs(s) >= std::abs(v)) comp += (s - t) + v;
        else comp += (v - t) + s;
        s = t;
    }
    return s + comp;
}

}  // namespace prices::kernels
