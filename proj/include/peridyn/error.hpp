#pragma once

#include <stdexcept>
#include <string>

namespace peridyn {

/// Bad input: malformed parameters, mismatched grids, incommensurate scales.
class invalid_argument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The requested evaluation path needs something the operator does not
/// carry (typically an assembled matrix).
class unsupported_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The operator series cannot be truncated within the term budget.
class step_too_large : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace peridyn
