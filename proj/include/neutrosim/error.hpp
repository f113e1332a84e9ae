#pragma once

#include <stdexcept>
#include <string>

namespace neutrosim {

/// Base class for every error raised by the library. Messages carry a
/// module prefix ("autodiff: ...", "motion-ar: ...") so the CLI can report
/// them verbatim.
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Caller violated a precondition: bad shape, out-of-range argument.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity showed up where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated, or out-of-range file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace neutrosim
