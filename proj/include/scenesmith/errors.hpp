#pragma once

#include <stdexcept>
#include <string>

namespace scenesmith {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input documents, schema violations, degenerate geometry.
class ValidationError : public Error {
public:
    using Error::Error;
};

class LayoutError : public Error {
public:
    using Error::Error;
};

class RetrievalError : public Error {
public:
    using Error::Error;
};

class MaterialError : public Error {
public:
    using Error::Error;
};

class BenchmarkError : public Error {
public:
    using Error::Error;
};

/// Transport or protocol failure while talking to an external service.
class ServiceError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; carries the stage name, the last good artifact and the cause.
class StageError : public Error {
public:
    enum class Cause { validation, stage, service };

    StageError(std::string stage, std::string last_good, const std::string& what, Cause cause = Cause::stage)
        : Error("stage '" + stage + "' failed: " + what)
        , stage_(std::move(stage))
        , last_good_(std::move(last_good))
        , cause_(cause)
    {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& last_good_artifact() const noexcept { return last_good_; }
    Cause cause() const noexcept { return cause_; }

private:
    std::string stage_;
    std::string last_good_;
    Cause cause_;
};

} // namespace scenesmith
