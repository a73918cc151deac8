// SPDX-License-Identifier: Apache-2.0
//
// The e-Government envelope: the signed unit exchanged between delegated and
// applicative ports. Layout (canonical JSON, keys sorted, no whitespace):
//
//   {"body":{"content_type":..,"payload":<base64>},
//    "correlation_id":<string|null>,"created_at":"YYYY-MM-DDTHH:MM:SS.mmmZ",
//    "destination":{"admin_id":..,"service_id":..},"envelope_id":<uuid>,
//    "message_kind":"request|response|event|fault",
//    "profile":"sync|async_event|async_process",
//    "security":{"algorithm":..,"key_id":..,"signature":<base64>,"signer_admin_id":..},
//    "sender":{"admin_id":..,"port_id":..}}
//
// The signed bytes are this document with "security" removed. The national
// envelope model has no published schema, so the layout is our own.
#pragma once

#include "ssc/clock.hpp"
#include "ssc/codec.hpp"
#include "ssc/crypto.hpp"

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace ssc {

enum class Profile { Sync, AsyncEvent, AsyncProcess };
enum class MessageKind { Request, Response, Event, Fault };

std::string_view to_string(Profile p) noexcept;
std::string_view to_string(MessageKind k) noexcept;
std::optional<Profile> parse_profile(std::string_view s) noexcept;
std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept;

struct Sender {
    std::string admin_id;
    std::string port_id;
    bool operator==(const Sender&) const = default;
};

struct Destination {
    std::string admin_id;
    std::string service_id;
    bool operator==(const Destination&) const = default;
    auto operator<=>(const Destination&) const = default;
};

struct Body {
    std::string content_type;
    Bytes payload;
    bool operator==(const Body&) const = default;
};

struct SignatureBlock {
    std::string signer_admin_id;
    std::string key_id;
    std::string algorithm;
    Bytes signature;
    bool operator==(const SignatureBlock&) const = default;
};

struct Envelope {
    std::string envelope_id;
    Timestamp created_at{};
    Sender sender;
    Destination destination;
    Profile profile = Profile::Sync;
    MessageKind message_kind = MessageKind::Request;
    std::optional<std::string> correlation_id;
    Body body;
    std::optional<SignatureBlock> security;

    bool operator==(const Envelope&) const = default;

    std::string payload_text() const { return to_string(body.payload); }
};

Envelope build_envelope(const Sender& sender, const Destination& destination, Profile profile, MessageKind kind,
                        Body body, std::optional<std::string> correlation = std::nullopt,
                        const Clock& clock = SystemClock{});

/// Deterministic bytes covered by the signature ("security" excluded).
Bytes canonical_bytes(const Envelope& e);
/// Full wire form, including "security" when present.
std::string serialize_envelope(const Envelope& e);
/// Tolerant reader: unknown fields are ignored. Throws MalformedEnvelope.
Envelope parse_envelope(std::string_view bytes);

struct KeyEntry {
    std::string key_id;
    PublicKey public_key;
    bool active = true;
};

/// Public keys of every administration, by admin_id then key_id.
class KeyDirectory {
public:
    void add_key(const std::string& admin_id, const std::string& key_id, const PublicKey& key);
    /// No-op when the exact key is already present and active.
    void ensure_key(const std::string& admin_id, const std::string& key_id, const PublicKey& key);
    void revoke(const std::string& admin_id, const std::string& key_id);
    std::optional<KeyEntry> lookup(const std::string& admin_id, const std::string& key_id) const;
    /// Any administration other than `except_admin` that holds this key_id.
    std::optional<std::string> other_holder(const std::string& key_id, const std::string& except_admin) const;
    std::vector<std::string> admins() const;

    /// {"admin_id":[{"key_id":..,"public_key":<b64>,"status":"active|revoked"}]}
    void load_json_file(const std::string& path);

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::map<std::string, KeyEntry>> keys_;
};

Envelope sign_envelope(const Envelope& e, const SecretKey& key, const std::string& key_id,
                       const KeyDirectory& directory);

enum class VerifyReason { Ok, MissingSignature, UnknownKey, RevokedKey, SignerMismatch, UnsupportedAlgorithm, BadSignature };
std::string_view to_string(VerifyReason r) noexcept;

struct VerificationReport {
    bool valid = false;
    VerifyReason reason = VerifyReason::MissingSignature;
};

VerificationReport verify_envelope(const Envelope& e, const KeyDirectory& directory);

}  // namespace ssc
