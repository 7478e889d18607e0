#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace stomor {

/// Base class of every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A linear system is singular to working tolerance.
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, double condition_estimate)
        : Error(what), condition_estimate_(condition_estimate) {}

    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

/// An iterative decomposition (eigen, SVD) failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// QR of a matrix without full column rank, or a degenerate Lyapunov frame.
class RankDeficient : public Error {
public:
    using Error::Error;
};

/// A spectrum certificate required by a reduced-model construction failed.
class CertificateFailed : public Error {
public:
    CertificateFailed(const std::string& what, std::string certificate,
                      std::complex<double> offending_eigenvalue)
        : Error(what),
          certificate_(std::move(certificate)),
          eigenvalue_(offending_eigenvalue) {}

    const std::string& certificate() const noexcept { return certificate_; }
    std::complex<double> offending_eigenvalue() const noexcept { return eigenvalue_; }

private:
    std::string certificate_;
    std::complex<double> eigenvalue_;
};

/// The requested construction has no (real) solution.
class NoSolution : public Error {
public:
    using Error::Error;
};

/// Pole placement on an unobservable (L, S) pair.
class NotPlaceable : public Error {
public:
    NotPlaceable(const std::string& what, std::size_t unobservable_dimension)
        : Error(what), unobservable_dimension_(unobservable_dimension) {}

    std::size_t unobservable_dimension() const noexcept { return unobservable_dimension_; }

private:
    std::size_t unobservable_dimension_;
};

/// A simulated state left the divergence guard.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Malformed input text. Line numbers are 1-based; 0 means "whole file".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// File system failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace stomor
