#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exch {

// Argument outside the mathematical domain of an operation (N = 0, delta = 2,
// lambda past the edge of a certificate's interval, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed input data. Carries the offending position when there is one.
class ValidationError : public std::invalid_argument {
public:
    static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

    explicit ValidationError(const std::string& what, std::size_t index = kNoIndex)
        : std::invalid_argument(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// A bound's hypothesis does not hold for the supplied inputs
// (negative weight for the nonnegative bound, uncentered population, ...).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Exhaustive enumeration would exceed its budget.
class ResourceError : public std::runtime_error {
public:
    ResourceError(const std::string& what, double count)
        : std::runtime_error(what), count_(count) {}

    double count() const noexcept { return count_; }

private:
    double count_;
};

}  // namespace exch
