#ifndef IRMMV_ERRORS_HPP
#define IRMMV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace irmmv {

/// Shape mismatch between operands (wrong rows/cols for the operation).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerically invalid state: non-finite values, undefined metrics,
/// degenerate inputs (zero columns, zero ground truth, ...).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Linear system is singular / rank deficient where full rank is required.
struct SingularSystemError : NumericError {
    using NumericError::NumericError;
};

/// Malformed input file (IDX or CSV).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace irmmv

#endif
