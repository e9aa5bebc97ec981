#pragma once

#include <stdexcept>
#include <string>

namespace edpm {

/// Base class for every error thrown by this library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Out-of-contract inputs: bad dimensions, non-positive scales, malformed
/// states, inconsistent configuration values.
class validation_error : public error {
public:
    using error::error;
};

/// Malformed input files (CSV data, trace files, key-value configs).
/// Messages carry file, line, and where possible column context.
class parse_error : public validation_error {
public:
    using validation_error::validation_error;
};

/// Numerical degeneracy that cannot be recovered from: non-finite
/// intermediates, singular linear systems, total underflow of a
/// categorical distribution.
class numerical_error : public error {
public:
    using error::error;
};

} // namespace edpm
