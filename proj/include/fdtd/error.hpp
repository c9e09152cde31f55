#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fdtd {

/// Invalid user input: parameters, shapes, flags, file contents.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed IR detected outside of verify() (which reports diagnostics instead).
class IrError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A transform directive could not be applied. `directive` is the 0-based
/// index of the failing directive within its script, or -1 when the error
/// came from a direct API call.
class ScriptError : public std::runtime_error {
public:
    explicit ScriptError(const std::string& what, int directive = -1)
        : std::runtime_error(what), directive_(directive) {}

    int directive() const noexcept { return directive_; }

private:
    int directive_;
};

class LoweringError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by run() when the periodic field check finds a non-finite value or
/// a max-norm above the configured threshold.
class InstabilityError : public std::runtime_error {
public:
    InstabilityError(const std::string& what, std::int64_t step)
        : std::runtime_error(what), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fdtd
