#pragma once

#include <stdexcept>
#include <string>

namespace adatm {

// Base of every error the library throws. Each subclass maps to one failure
// class in the public contract so callers (and the CLI exit codes) can
// dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class LifecycleError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// Schema violation while reading JSON; `path` is a JSON pointer-like location.
class ParseError : public Error {
public:
    ParseError(std::string path, const std::string& what)
        : Error((path.empty() ? std::string("/") : path) + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace adatm
