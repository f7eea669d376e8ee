#pragma once

#include <stdexcept>
#include <string>

namespace ssenc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Width or shape mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite values produced during a rollout or an optimizer step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step = -1) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

// Ball position reached a wall of the box, where the repulsion term is singular.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, long step = -1) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

} // namespace ssenc
