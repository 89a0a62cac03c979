#pragma once

#include <stdexcept>
#include <string>

namespace hierts {

/// Raised when a matrix required to be positive definite fails the pivot test.
struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a matrix handed to symmetrize() is too far from symmetric.
struct AsymmetryTooLarge : std::runtime_error {
    explicit AsymmetryTooLarge(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a task id is outside the configured task range.
struct UnknownTask : std::runtime_error {
    explicit UnknownTask(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a duplicate-free concurrent batching cannot be found.
struct InfeasibleBatching : std::runtime_error {
    explicit InfeasibleBatching(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a forced-exploration basis does not span the action space.
struct BasisDoesNotSpan : std::runtime_error {
    explicit BasisDoesNotSpan(const std::string& what) : std::runtime_error(what) {}
};

/// Config parsing: a required key is absent.
struct MissingKey : std::runtime_error {
    explicit MissingKey(const std::string& key_path)
        : std::runtime_error("missing key: " + key_path), key(key_path) {}
    std::string key;
};

/// Config parsing: a key is present but its value is invalid.
struct BadValue : std::runtime_error {
    BadValue(const std::string& key_path, const std::string& reason)
        : std::runtime_error("bad value for " + key_path + ": " + reason),
          key(key_path),
          reason(reason) {}
    std::string key;
    std::string reason;
};

/// An action lies outside the unit ball.
struct UnitBallViolation : std::runtime_error {
    explicit UnitBallViolation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hierts
