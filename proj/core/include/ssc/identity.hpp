// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/audit.hpp"
#include "ssc/crypto.hpp"
#include "ssc/registry.hpp"
#include "ssc/storage.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>

namespace ssc {

using AttributeMap = std::map<std::string, std::string>;

/// Public view of an account; the password hash never leaves the module.
struct UserAccount {
    std::string user_id;
    bool has_strong_credential = false;
    std::set<std::string> roles;
    AttributeMap static_profile;
    AttributeMap dynamic_preferences;
};

nlohmann::json to_json(const UserAccount& a);

struct SsoToken {
    std::string token_id;
    std::string subject;
    AuthLevel level = AuthLevel::Weak;
    Timestamp issued_at{};
    Timestamp expires_at{};
    /// Bearer form: base64url(claims) "." base64url(signature).
    std::string encoded;
};

nlohmann::json to_json(const SsoToken& t);

struct TokenClaims {
    std::string token_id;
    std::string user_id;
    AuthLevel level = AuthLevel::Weak;
    Timestamp expires_at{};
};

struct AuthDecision {
    bool allow = false;
    /// ok | missing | invalid | expired | level
    std::string reason;
};

struct UserProfile {
    AttributeMap static_profile;
    AttributeMap dynamic_preferences;
};

class Identity {
public:
    static constexpr Millis kDefaultTtl = std::chrono::hours(8);
    static constexpr Millis kChallengeTtl = std::chrono::minutes(2);

    /// `signer` is the framework key; tokens are verified with its public half
    /// only, so any gateway sharing that key accepts them.
    Identity(std::unique_ptr<AppendLog> store, AuditLog& audit, const Clock& clock, const KeyPair& signer,
             PasswordHashParams params = PasswordHashParams::interactive(), Millis ttl = kDefaultTtl);

    UserAccount register_user(const std::string& user_id, const std::string& password,
                              std::optional<PublicKey> public_key, std::set<std::string> roles,
                              AttributeMap static_profile);
    bool has_user(const std::string& user_id) const;

    /// Password path, yields a weak token.
    SsoToken authenticate(const std::string& user_id, const std::string& password);
    /// Base64 nonce the user signs with the registered key.
    std::string issue_challenge(const std::string& user_id);
    /// Challenge path, yields a strong token. Nonces are single-use.
    SsoToken authenticate_strong(const std::string& user_id, const std::string& nonce,
                                 const std::string& signature_b64);

    /// Pure function of the token, the framework public key and the clock.
    TokenClaims validate_token(const std::string& token) const;
    AuthDecision authorize(const std::optional<std::string>& token, AuthLevel required) const;
    AuthDecision authorize(const std::optional<std::string>& token, const ServiceDescriptor& d) const {
        return authorize(token, d.min_auth_level);
    }

    UserProfile get_profile(const std::string& user_id) const;
    AttributeMap update_preferences(const std::string& user_id, const AttributeMap& delta);
    UserAccount account(const std::string& user_id) const;
    bool has_role(const std::string& user_id, const std::string& role) const;

    bool healthy() const { return store_->healthy(); }

    /// Attribute names that belong to the static subsystem even when a user's
    /// registry record does not carry them.
    static const std::set<std::string>& static_attribute_names();

private:
    struct Account {
        UserAccount view;
        std::string password_hash;
        std::optional<PublicKey> strong_key;
    };
    struct Challenge {
        std::string user_id;
        Timestamp expires_at;
    };

    SsoToken issue(const std::string& user_id, AuthLevel level);

    std::unique_ptr<AppendLog> store_;
    AuditLog& audit_;
    const Clock& clock_;
    const KeyPair& signer_;
    PasswordHashParams params_;
    Millis ttl_;

    mutable std::shared_mutex mu_;
    std::map<std::string, Account> accounts_;
    std::mutex challenges_mu_;
    std::map<std::string, Challenge> challenges_;
};

}  // namespace ssc
