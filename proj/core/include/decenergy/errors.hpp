#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace decenergy {

// Input data broke a structural or semantic rule (bad trace record, malformed
// file, nonmonotonic power log, ...). Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be opened, read, or written. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric or degenerate failure (underdetermined fit, degenerate abscissa,
// division by a zero average). std::domain_error maps to CLI exit code 2.
// Carries the names of constants the data cannot identify, when applicable.
class CalibrationError : public std::domain_error {
public:
    explicit CalibrationError(const std::string& what,
                              std::vector<std::string> unidentifiable = {})
        : std::domain_error(what), unidentifiable_(std::move(unidentifiable)) {}

    const std::vector<std::string>& unidentifiable() const { return unidentifiable_; }

private:
    std::vector<std::string> unidentifiable_;
};

}  // namespace decenergy
