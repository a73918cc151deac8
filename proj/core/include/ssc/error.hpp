// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssc {

/// Every failure the framework raises carries one of these codes. The HTTP
/// layer maps them onto status codes; tests match on them directly.
enum class ErrorCode {
    // envelope
    InvalidAddress,
    MissingCorrelation,
    MalformedEnvelope,
    UnknownKey,
    DuplicateKey,
    AlreadySigned,
    // cooperation
    DuplicatePort,
    UnknownPort,
    NoRoute,
    // eventbus
    InvalidTopicName,
    UnknownTopic,
    UnknownSubscription,
    CursorRegression,
    CursorBeyondHead,
    VerificationFailed,
    // orchestration
    ValidationFailed,
    UnknownModel,
    MissingInput,
    UnknownInstance,
    UnknownTask,
    AlreadyClaimed,
    RoleDenied,
    NotClaimant,
    AlreadyCompleted,
    InstanceFinished,
    // registry
    DuplicateNode,
    UnknownParent,
    CycleDetected,
    UnknownLifeEvent,
    UnknownBinding,
    DuplicateService,
    UnknownService,
    // identity
    DuplicateUser,
    WeakPassword,
    BadCredential,
    NoStrongCredential,
    InvalidToken,
    ExpiredToken,
    UnknownUser,
    StaticAttributeViolation,
    Unauthorized,
    Forbidden,
    // storage / gateway
    StorageFailure,
    StorageCorrupt,
    ConfigError,
    ScenarioError,
    BadRequest,
    NotFound,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace ssc
