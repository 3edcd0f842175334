#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lpflow {

/// Broad error classes. The CLI maps each class to its own exit code.
enum class ErrorKind {
    Configuration,
    Numerical,
    Pipeline,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Configuration, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

/// Orbit left the working box. Carries the last state that was inside.
class EscapeError : public NumericalError {
public:
    EscapeError(const std::string& what, double t, Eigen::VectorXd last)
        : NumericalError(what), time_(t), last_(std::move(last)) {}
    double time() const noexcept { return time_; }
    const Eigen::VectorXd& last_valid_state() const noexcept { return last_; }

private:
    double time_;
    Eigen::VectorXd last_;
};

class BudgetError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// |X| fell below the singularity threshold where the normal bundle is undefined.
class SingularityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoCrossingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InsufficientDataError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ClosingError : public Error {
public:
    explicit ClosingError(const std::string& what) : Error(ErrorKind::Pipeline, what) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error(ErrorKind::Pipeline, what) {}
};

}  // namespace lpflow
