#include "rangekit/core/error.hpp"

namespace rangekit {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::InvalidPhase: return "InvalidPhase";
        case ErrorCode::UnknownSelector: return "UnknownSelector";
        case ErrorCode::CompileError: return "CompileError";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::NodeNotRunning: return "NodeNotRunning";
        case ErrorCode::DuplicateSandboxId: return "DuplicateSandboxId";
        case ErrorCode::InvalidTransition: return "InvalidTransition";
        case ErrorCode::EmptyCommand: return "EmptyCommand";
        case ErrorCode::DuplicateRun: return "DuplicateRun";
        case ErrorCode::UnknownRun: return "UnknownRun";
        case ErrorCode::PhaseNotAnswerable: return "PhaseNotAnswerable";
        case ErrorCode::PhaseNotAdvanceable: return "PhaseNotAdvanceable";
        case ErrorCode::RunFinished: return "RunFinished";
        case ErrorCode::UnknownHint: return "UnknownHint";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InvalidDefinition: return "InvalidDefinition";
        case ErrorCode::InsufficientResources: return "InsufficientResources";
        case ErrorCode::DefinitionNotFound: return "DefinitionNotFound";
        case ErrorCode::PoolNotFound: return "PoolNotFound";
        case ErrorCode::InstanceNotFound: return "InstanceNotFound";
        case ErrorCode::InvalidWindow: return "InvalidWindow";
        case ErrorCode::InvalidToken: return "InvalidToken";
        case ErrorCode::OutsideWindow: return "OutsideWindow";
        case ErrorCode::PoolExhausted: return "PoolExhausted";
        case ErrorCode::NotAssigned: return "NotAssigned";
        case ErrorCode::InstanceActive: return "InstanceActive";
        case ErrorCode::Forbidden: return "Forbidden";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::Storage: return "Storage";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace rangekit
