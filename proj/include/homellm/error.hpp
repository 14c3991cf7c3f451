#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace homellm {

enum class Errc {
    SyntaxError,
    StructureError,
    EmptyCommand,
    Timeout,
    AuthError,
    TransportError,
    OversizeResponse,
    UnparseablePrompt,
    NoPayload,
    StructureMismatch,
    StaleChange,
    UnboundDevice,
    UnsupportedProperty,
    UnknownFixture,
    DuplicateRater,
    LabelOutOfDomain,
    UnratedTrials,
    NotFound,
    NotPending,
    BackendError,
    InvalidArgument,
    IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::StructureError: return "StructureError";
    case Errc::EmptyCommand: return "EmptyCommand";
    case Errc::Timeout: return "Timeout";
    case Errc::AuthError: return "AuthError";
    case Errc::TransportError: return "TransportError";
    case Errc::OversizeResponse: return "OversizeResponse";
    case Errc::UnparseablePrompt: return "UnparseablePrompt";
    case Errc::NoPayload: return "NoPayload";
    case Errc::StructureMismatch: return "StructureMismatch";
    case Errc::StaleChange: return "StaleChange";
    case Errc::UnboundDevice: return "UnboundDevice";
    case Errc::UnsupportedProperty: return "UnsupportedProperty";
    case Errc::UnknownFixture: return "UnknownFixture";
    case Errc::DuplicateRater: return "DuplicateRater";
    case Errc::LabelOutOfDomain: return "LabelOutOfDomain";
    case Errc::UnratedTrials: return "UnratedTrials";
    case Errc::NotFound: return "NotFound";
    case Errc::NotPending: return "NotPending";
    case Errc::BackendError: return "BackendError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (HTTP layer, harness, CLI) can classify it without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace homellm
