#pragma once

#include <stdexcept>
#include <string>

namespace switchkac {

// Bad model/measure/config declarations: wrong dimensions, broken generator
// rows, infinite activity without truncation, unknown registry names.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature or linear-solve failure. Carries the last two refinement
// estimates so callers can see how far apart they were.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double coarse, double fine)
        : std::runtime_error(what), coarse_estimate(coarse), fine_estimate(fine) {}
    explicit NumericalError(const std::string& what)
        : std::runtime_error(what), coarse_estimate(0.0), fine_estimate(0.0) {}

    double coarse_estimate;
    double fine_estimate;
};

class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace switchkac
