#pragma once

#include <stdexcept>
#include <string>

namespace seglab {

// Shapes or class sets of two operands disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input values (out-of-range index, non-positive weight, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The finite-difference oracle evaluated a loss to a non-finite value.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A forward cache was used with a different network or parameter generation.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite gradient or loss during training.
class TrainingAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace seglab
