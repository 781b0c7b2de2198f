#pragma once

#include <stdexcept>
#include <string>

namespace plskm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid path-model description.
class SpecError : public Error {
public:
    SpecError(const std::string& message, int line = 0, int column = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message
                         : message),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Bad input data: wrong shape, constant columns, missing cells, etc.
class DataError : public Error {
public:
    using Error::Error;
};

/// Singular systems and degenerate iterates. `iteration()` is 0 when the
/// failure is not tied to an iteration of the alternating estimator.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& message, int iteration = 0)
        : Error(iteration > 0 ? message + " (iteration " + std::to_string(iteration) + ")" : message),
          iteration_(iteration) {}

    int iteration() const { return iteration_; }

private:
    int iteration_;
};

}  // namespace plskm
