// SPDX-License-Identifier: Apache-2.0
#include "ssc/envelope.hpp"

#include "ssc/error.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <mutex>

namespace ssc {

using nlohmann::json;

std::string_view to_string(Profile p) noexcept {
    switch (p) {
        case Profile::Sync: return "sync";
        case Profile::AsyncEvent: return "async_event";
        case Profile::AsyncProcess: return "async_process";
    }
    return "sync";
}

std::string_view to_string(MessageKind k) noexcept {
    switch (k) {
        case MessageKind::Request: return "request";
        case MessageKind::Response: return "response";
        case MessageKind::Event: return "event";
        case MessageKind::Fault: return "fault";
    }
    return "request";
}

std::optional<Profile> parse_profile(std::string_view s) noexcept {
    if (s == "sync") return Profile::Sync;
    if (s == "async_event") return Profile::AsyncEvent;
    if (s == "async_process") return Profile::AsyncProcess;
    return std::nullopt;
}

std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept {
    if (s == "request") return MessageKind::Request;
    if (s == "response") return MessageKind::Response;
    if (s == "event") return MessageKind::Event;
    if (s == "fault") return MessageKind::Fault;
    return std::nullopt;
}

std::string_view to_string(VerifyReason r) noexcept {
    switch (r) {
        case VerifyReason::Ok: return "ok";
        case VerifyReason::MissingSignature: return "missing_signature";
        case VerifyReason::UnknownKey: return "unknown_key";
        case VerifyReason::RevokedKey: return "revoked_key";
        case VerifyReason::SignerMismatch: return "signer_mismatch";
        case VerifyReason::UnsupportedAlgorithm: return "unsupported_algorithm";
        case VerifyReason::BadSignature: return "bad_signature";
    }
    return "bad_signature";
}

namespace {

bool requires_correlation(MessageKind k) { return k == MessageKind::Response || k == MessageKind::Fault; }

json to_json(const Envelope& e, bool with_security) {
    json j = json::object();
    j["body"] = {{"content_type", e.body.content_type}, {"payload", base64_encode(e.body.payload)}};
    j["correlation_id"] = e.correlation_id ? json(*e.correlation_id) : json(nullptr);
    j["created_at"] = format_timestamp(e.created_at);
    j["destination"] = {{"admin_id", e.destination.admin_id}, {"service_id", e.destination.service_id}};
    j["envelope_id"] = e.envelope_id;
    j["message_kind"] = std::string(to_string(e.message_kind));
    j["profile"] = std::string(to_string(e.profile));
    j["sender"] = {{"admin_id", e.sender.admin_id}, {"port_id", e.sender.port_id}};
    if (with_security && e.security) {
        const auto& s = *e.security;
        j["security"] = {{"algorithm", s.algorithm},
                         {"key_id", s.key_id},
                         {"signature", base64_encode(s.signature)},
                         {"signer_admin_id", s.signer_admin_id}};
    }
    return j;
}

std::string dump(const json& j) {
    try {
        return j.dump(-1, ' ', false, json::error_handler_t::strict);
    } catch (const json::type_error& ex) {
        fail(ErrorCode::InvalidAddress, std::string("envelope text is not valid UTF-8: ") + ex.what());
    }
}

[[noreturn]] void malformed(const std::string& what) { fail(ErrorCode::MalformedEnvelope, what); }

const json& member(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) malformed("missing field '" + path + key + "'");
    return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_string()) malformed("field '" + path + key + "' must be a string");
    return v.get<std::string>();
}

const json& object_field(const json& obj, const char* key) {
    const auto& v = member(obj, key, "");
    if (!v.is_object()) malformed(std::string("field '") + key + "' must be an object");
    return v;
}

Bytes b64_field(const json& obj, const char* key, const std::string& path) {
    auto decoded = base64_decode(string_field(obj, key, path));
    if (!decoded) malformed("field '" + path + key + "' is not canonical base64");
    return std::move(*decoded);
}

}  // namespace

Envelope build_envelope(const Sender& sender, const Destination& destination, Profile profile, MessageKind kind,
                        Body body, std::optional<std::string> correlation, const Clock& clock) {
    if (sender.admin_id.empty() || sender.port_id.empty()) fail(ErrorCode::InvalidAddress, "empty sender identifier");
    if (destination.admin_id.empty() || destination.service_id.empty())
        fail(ErrorCode::InvalidAddress, "empty destination identifier");
    if (correlation && correlation->empty()) correlation.reset();
    if (requires_correlation(kind) && !correlation)
        fail(ErrorCode::MissingCorrelation, std::string(to_string(kind)) + " envelopes need a correlation_id");
    Envelope e;
    e.envelope_id = new_uuid();
    e.created_at = clock.now();
    e.sender = sender;
    e.destination = destination;
    e.profile = profile;
    e.message_kind = kind;
    e.correlation_id = std::move(correlation);
    e.body = std::move(body);
    return e;
}

Bytes canonical_bytes(const Envelope& e) { return to_bytes(dump(to_json(e, false))); }

std::string serialize_envelope(const Envelope& e) { return dump(to_json(e, true)); }

namespace {

/// String escapes must be spelled exactly as the serializer spells them, so a
/// string has one spelling on the wire ("\u001F" for "\u001f" is refused).
std::optional<std::string> non_canonical_escape(std::string_view bytes) {
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    bool in_string = false;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const char c = bytes[i];
        if (c == '"') {
            in_string = !in_string;
        } else if (c == '\\' && in_string && i + 1 < bytes.size()) {
            const char e = bytes[++i];
            if (e == '"' || e == '\\' || e == 'b' || e == 'f' || e == 'n' || e == 'r' || e == 't') continue;
            if (e == 'u' && i + 4 < bytes.size() && bytes[i + 1] == '0' && bytes[i + 2] == '0' && hex(bytes[i + 3]) >= 0 &&
                hex(bytes[i + 4]) >= 0) {
                const int cp = hex(bytes[i + 3]) * 16 + hex(bytes[i + 4]);
                if (cp < 0x20 && cp != '\b' && cp != '\f' && cp != '\n' && cp != '\r' && cp != '\t') {
                    i += 4;
                    continue;
                }
            }
            return "non-canonical escape at byte " + std::to_string(i - 1);
        }
    }
    return std::nullopt;
}

}  // namespace

Envelope parse_envelope(std::string_view bytes) {
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& ex) {
        malformed("byte " + std::to_string(ex.byte) + ": " + ex.what());
    } catch (const json::exception& ex) {
        // e.g. a number literal too large for any numeric type
        malformed(ex.what());
    }
    if (!j.is_object()) malformed("top level must be an object");
    if (auto where = non_canonical_escape(bytes)) malformed(*where);

    Envelope e;
    e.envelope_id = string_field(j, "envelope_id", "");
    if (!looks_like_uuid(e.envelope_id)) malformed("field 'envelope_id' is not a UUID");

    auto created = parse_timestamp(string_field(j, "created_at", ""));
    if (!created) malformed("field 'created_at' is not an ISO-8601 UTC millisecond timestamp");
    e.created_at = *created;

    const auto& sender = object_field(j, "sender");
    e.sender = {string_field(sender, "admin_id", "sender."), string_field(sender, "port_id", "sender.")};
    const auto& dest = object_field(j, "destination");
    e.destination = {string_field(dest, "admin_id", "destination."), string_field(dest, "service_id", "destination.")};
    if (e.sender.admin_id.empty() || e.sender.port_id.empty() || e.destination.admin_id.empty() ||
        e.destination.service_id.empty())
        malformed("empty address identifier");

    auto profile = parse_profile(string_field(j, "profile", ""));
    if (!profile) malformed("field 'profile' has an unknown value");
    e.profile = *profile;
    auto kind = parse_message_kind(string_field(j, "message_kind", ""));
    if (!kind) malformed("field 'message_kind' has an unknown value");
    e.message_kind = *kind;

    const auto& corr = member(j, "correlation_id", "");
    if (corr.is_string()) {
        e.correlation_id = corr.get<std::string>();
        if (e.correlation_id->empty()) malformed("field 'correlation_id' is empty");
    } else if (!corr.is_null()) {
        malformed("field 'correlation_id' must be a string or null");
    }
    if (requires_correlation(e.message_kind) && !e.correlation_id) malformed("response/fault without correlation_id");

    const auto& body = object_field(j, "body");
    e.body.content_type = string_field(body, "content_type", "body.");
    e.body.payload = b64_field(body, "payload", "body.");

    if (auto it = j.find("security"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) malformed("field 'security' must be an object");
        SignatureBlock s;
        s.signer_admin_id = string_field(*it, "signer_admin_id", "security.");
        s.key_id = string_field(*it, "key_id", "security.");
        s.algorithm = string_field(*it, "algorithm", "security.");
        s.signature = b64_field(*it, "signature", "security.");
        e.security = std::move(s);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Key directory

void KeyDirectory::add_key(const std::string& admin_id, const std::string& key_id, const PublicKey& key) {
    if (admin_id.empty() || key_id.empty()) fail(ErrorCode::InvalidAddress, "empty admin or key id");
    std::unique_lock lock(mu_);
    auto& keys = keys_[admin_id];
    if (keys.contains(key_id)) fail(ErrorCode::DuplicateKey, admin_id + "/" + key_id);
    keys.emplace(key_id, KeyEntry{key_id, key, true});
}

void KeyDirectory::ensure_key(const std::string& admin_id, const std::string& key_id, const PublicKey& key) {
    {
        std::shared_lock lock(mu_);
        auto a = keys_.find(admin_id);
        if (a != keys_.end()) {
            auto k = a->second.find(key_id);
            if (k != a->second.end() && k->second.active && k->second.public_key == key) return;
        }
    }
    add_key(admin_id, key_id, key);
}

void KeyDirectory::revoke(const std::string& admin_id, const std::string& key_id) {
    std::unique_lock lock(mu_);
    auto a = keys_.find(admin_id);
    if (a == keys_.end() || !a->second.contains(key_id)) fail(ErrorCode::UnknownKey, admin_id + "/" + key_id);
    a->second.at(key_id).active = false;
}

std::optional<KeyEntry> KeyDirectory::lookup(const std::string& admin_id, const std::string& key_id) const {
    std::shared_lock lock(mu_);
    auto a = keys_.find(admin_id);
    if (a == keys_.end()) return std::nullopt;
    auto k = a->second.find(key_id);
    if (k == a->second.end()) return std::nullopt;
    return k->second;
}

std::optional<std::string> KeyDirectory::other_holder(const std::string& key_id,
                                                      const std::string& except_admin) const {
    std::shared_lock lock(mu_);
    for (const auto& [admin, keys] : keys_)
        if (admin != except_admin && keys.contains(key_id)) return admin;
    return std::nullopt;
}

std::vector<std::string> KeyDirectory::admins() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [admin, keys] : keys_) out.push_back(admin);
    return out;
}

void KeyDirectory::load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open key directory " + path);
    json j;
    try {
        j = json::parse(in);
        for (const auto& [admin, list] : j.items()) {
            for (const auto& k : list) {
                const auto key_id = k.at("key_id").get<std::string>();
                add_key(admin, key_id, decode_public_key(k.at("public_key").get<std::string>()));
                if (k.value("status", std::string("active")) == "revoked") revoke(admin, key_id);
            }
        }
    } catch (const json::exception& ex) {
        fail(ErrorCode::ConfigError, "key directory " + path + ": " + ex.what());
    }
}

// ---------------------------------------------------------------------------
// Signing

namespace {

struct SignatureAlgorithm {
    std::string_view id;
    bool (*verify)(std::span<const std::uint8_t> msg, std::span<const std::uint8_t> sig, const PublicKey& key);
};

bool ed25519_verify(std::span<const std::uint8_t> msg, std::span<const std::uint8_t> sig, const PublicKey& key) {
    return verify_detached(msg, sig, key);
}

constexpr SignatureAlgorithm kAlgorithms[] = {{kEd25519, &ed25519_verify}};

const SignatureAlgorithm* find_algorithm(std::string_view id) {
    for (const auto& a : kAlgorithms)
        if (a.id == id) return &a;
    return nullptr;
}

}  // namespace

Envelope sign_envelope(const Envelope& e, const SecretKey& key, const std::string& key_id,
                       const KeyDirectory& directory) {
    if (e.security) fail(ErrorCode::AlreadySigned, e.envelope_id);
    auto entry = directory.lookup(e.sender.admin_id, key_id);
    if (!entry || !entry->active) fail(ErrorCode::UnknownKey, e.sender.admin_id + "/" + key_id);
    if (std::memcmp(entry->public_key.bytes.data(), key.bytes().data() + 32, 32) != 0)
        fail(ErrorCode::UnknownKey, "secret key does not match directory entry " + key_id);
    Envelope signed_e = e;
    signed_e.security = SignatureBlock{e.sender.admin_id, key_id, std::string(kEd25519),
                                       sign_detached(canonical_bytes(e), key)};
    return signed_e;
}

VerificationReport verify_envelope(const Envelope& e, const KeyDirectory& directory) {
    auto report = [](VerifyReason r) { return VerificationReport{r == VerifyReason::Ok, r}; };
    if (!e.security) return report(VerifyReason::MissingSignature);
    const auto& sec = *e.security;
    if (sec.signer_admin_id != e.sender.admin_id) return report(VerifyReason::SignerMismatch);
    auto entry = directory.lookup(sec.signer_admin_id, sec.key_id);
    if (!entry) {
        if (directory.other_holder(sec.key_id, sec.signer_admin_id)) return report(VerifyReason::SignerMismatch);
        return report(VerifyReason::UnknownKey);
    }
    if (!entry->active) return report(VerifyReason::RevokedKey);
    const auto* algo = find_algorithm(sec.algorithm);
    if (!algo) return report(VerifyReason::UnsupportedAlgorithm);
    if (!algo->verify(canonical_bytes(e), sec.signature, entry->public_key)) return report(VerifyReason::BadSignature);
    return report(VerifyReason::Ok);
}

}  // namespace ssc
