#pragma once

#include <stdexcept>
#include <string>

namespace prices {

/// Base for all errors raised by the library. `module()` names the
/// subsystem that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Malformed or inconsistent input data (CLI exit code 1).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular systems, non-convergence, infeasible budgets
/// (CLI exit code 2).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace prices
