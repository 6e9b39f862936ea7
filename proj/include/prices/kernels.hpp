#pragma once

// Data-parallel building blocks. Every kernel has a serial reference path
// selected by Execution::serial; the parallel path performs the same
// floating-point operations in the same order per output element, so both
// paths return bit-identical results regardless of thread count.

#include <Eigen/Dense>
#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace prices::kernels {

enum class Execution { serial, parallel };

/// Number of worker threads the parallel path will use.
int max_threads();

/// Calls f(i) for i in [0, n). In parallel mode an exception thrown by any
/// iteration is captured and the one from the lowest index is rethrown
/// after the loop, so error reporting does not depend on scheduling.
template <class F>
void for_each_index(std::size_t n, Execution exec, F&& f) {
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// C = A * B, one output column per task.
Eigen::MatrixXd matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Execution exec);

/// y = M^T * v, one output entry per task.
Eigen::VectorXd transposed_apply(const Eigen::MatrixXd& m, const Eigen::VectorXd& v, Execution exec);

/// Sum of weights[i] * values[i] with compensated (Neumaier) summation in
/// index order. This is the canonical reduction used for every aggregate.
double weighted_sum(std::span<const double> weights, std::span<const double> values);
double sum(std::span<const double> values);

}  // namespace prices::kernels
