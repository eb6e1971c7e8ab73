#pragma once

#include <stdexcept>
#include <string>

namespace pipgan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingFile : public Error {
public:
    using Error::Error;
};

class UnknownCategory : public Error {
public:
    using Error::Error;
};

class DuplicateRow : public Error {
public:
    using Error::Error;
};

class MissingImage : public Error {
public:
    using Error::Error;
};

class MissingSource : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

class SizeMismatch : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

class CorruptCheckpoint : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(std::string term, long step)
        : Error("non-finite loss term '" + term + "' at step " + std::to_string(step)),
          term_(std::move(term)),
          step_(step) {}

    const std::string& term() const noexcept { return term_; }
    long step() const noexcept { return step_; }

private:
    std::string term_;
    long step_;
};

class CapabilityError : public Error {
public:
    using Error::Error;
};

class DuplicateMethod : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace pipgan
