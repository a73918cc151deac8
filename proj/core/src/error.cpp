// SPDX-License-Identifier: Apache-2.0
#include "ssc/error.hpp"

namespace ssc {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidAddress: return "InvalidAddress";
        case ErrorCode::MissingCorrelation: return "MissingCorrelation";
        case ErrorCode::MalformedEnvelope: return "MalformedEnvelope";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::AlreadySigned: return "AlreadySigned";
        case ErrorCode::DuplicatePort: return "DuplicatePort";
        case ErrorCode::UnknownPort: return "UnknownPort";
        case ErrorCode::NoRoute: return "NoRoute";
        case ErrorCode::InvalidTopicName: return "InvalidTopicName";
        case ErrorCode::UnknownTopic: return "UnknownTopic";
        case ErrorCode::UnknownSubscription: return "UnknownSubscription";
        case ErrorCode::CursorRegression: return "CursorRegression";
        case ErrorCode::CursorBeyondHead: return "CursorBeyondHead";
        case ErrorCode::VerificationFailed: return "VerificationFailed";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::UnknownModel: return "UnknownModel";
        case ErrorCode::MissingInput: return "MissingInput";
        case ErrorCode::UnknownInstance: return "UnknownInstance";
        case ErrorCode::UnknownTask: return "UnknownTask";
        case ErrorCode::AlreadyClaimed: return "AlreadyClaimed";
        case ErrorCode::RoleDenied: return "RoleDenied";
        case ErrorCode::NotClaimant: return "NotClaimant";
        case ErrorCode::AlreadyCompleted: return "AlreadyCompleted";
        case ErrorCode::InstanceFinished: return "InstanceFinished";
        case ErrorCode::DuplicateNode: return "DuplicateNode";
        case ErrorCode::UnknownParent: return "UnknownParent";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::UnknownLifeEvent: return "UnknownLifeEvent";
        case ErrorCode::UnknownBinding: return "UnknownBinding";
        case ErrorCode::DuplicateService: return "DuplicateService";
        case ErrorCode::UnknownService: return "UnknownService";
        case ErrorCode::DuplicateUser: return "DuplicateUser";
        case ErrorCode::WeakPassword: return "WeakPassword";
        case ErrorCode::BadCredential: return "BadCredential";
        case ErrorCode::NoStrongCredential: return "NoStrongCredential";
        case ErrorCode::InvalidToken: return "InvalidToken";
        case ErrorCode::ExpiredToken: return "ExpiredToken";
        case ErrorCode::UnknownUser: return "UnknownUser";
        case ErrorCode::StaticAttributeViolation: return "StaticAttributeViolation";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::Forbidden: return "Forbidden";
        case ErrorCode::StorageFailure: return "StorageFailure";
        case ErrorCode::StorageCorrupt: return "StorageCorrupt";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ScenarioError: return "ScenarioError";
        case ErrorCode::BadRequest: return "BadRequest";
        case ErrorCode::NotFound: return "NotFound";
    }
    return "Unknown";
}

}  // namespace ssc
