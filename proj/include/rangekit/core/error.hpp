#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rangekit {

enum class ErrorCode {
    ParseError,
    MissingField,
    InvalidValue,
    InvalidPhase,
    UnknownSelector,
    CompileError,
    UnknownNode,
    NodeNotRunning,
    DuplicateSandboxId,
    InvalidTransition,
    EmptyCommand,
    DuplicateRun,
    UnknownRun,
    PhaseNotAnswerable,
    PhaseNotAdvanceable,
    RunFinished,
    UnknownHint,
    MalformedLine,
    SchemaError,
    InvalidDefinition,
    InsufficientResources,
    DefinitionNotFound,
    PoolNotFound,
    InstanceNotFound,
    InvalidWindow,
    InvalidToken,
    OutsideWindow,
    PoolExhausted,
    NotAssigned,
    InstanceActive,
    Forbidden,
    Unauthorized,
    Storage,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure the library reports. The code is stable and is
/// what callers (CLI exit codes, HTTP status mapping, tests) dispatch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Syntax error with a 1-based source position (0 when unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column)
        : Error(ErrorCode::ParseError, message), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace rangekit
