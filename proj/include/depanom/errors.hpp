#pragma once

#include <stdexcept>
#include <string>

namespace depanom {

// Configuration / usage problems: bad files, bad arguments, contract
// violations at the API boundary. CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: non-finite losses or gradients, failed gradient
// checks. CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace depanom
