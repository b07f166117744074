#pragma once

#include <stdexcept>
#include <string>

namespace igtrack {

/// A function was called with arguments outside its documented domain.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent or infeasible configuration (shapes, generator settings, flags).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse such as replaying a consumed tape.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Training stopped because a loss component became non-finite.
class TrainingAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File missing, malformed or unwritable.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace igtrack
