#ifndef FEDIDS_ERROR_HPP
#define FEDIDS_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedids {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownNode : public Error {
public:
    using Error::Error;
};

class InvalidRedirection : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised by the log grammar. `offset` is the byte position in the input line
/// where parsing stopped.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& reason)
        : Error("parse error at byte " + std::to_string(offset) + ": " + reason),
          offset_(offset), reason_(reason) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

class IncompleteTrace : public Error {
public:
    using Error::Error;
};

class ScalerMismatch : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class EmptyRoster : public Error {
public:
    using Error::Error;
};

class MissingUpdate : public Error {
public:
    using Error::Error;
};

class EmptyValidation : public Error {
public:
    using Error::Error;
};

/// Wraps a failure inside one pipeline stage so the CLI can name the stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace fedids

#endif // FEDIDS_ERROR_HPP
