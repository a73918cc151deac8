// SPDX-License-Identifier: Apache-2.0
#include "ssc/identity.hpp"

#include "ssc/codec.hpp"
#include "ssc/error.hpp"

namespace ssc {

using nlohmann::json;

namespace {

constexpr std::size_t kMinPasswordLength = 8;
constexpr std::size_t kNonceBytes = 32;

}  // namespace

json to_json(const UserAccount& a) {
    return {{"user_id", a.user_id},
            {"strong_credential", a.has_strong_credential},
            {"roles", a.roles},
            {"static_profile", a.static_profile},
            {"dynamic_preferences", a.dynamic_preferences}};
}

json to_json(const SsoToken& t) {
    return {{"token", t.encoded},
            {"token_id", t.token_id},
            {"subject", t.subject},
            {"level", to_string(t.level)},
            {"issued_at", format_timestamp(t.issued_at)},
            {"expires_at", format_timestamp(t.expires_at)}};
}

const std::set<std::string>& Identity::static_attribute_names() {
    static const std::set<std::string> names{"full_name", "fiscal_code", "residence_admin_id", "birth_date"};
    return names;
}

Identity::Identity(std::unique_ptr<AppendLog> store, AuditLog& audit, const Clock& clock, const KeyPair& signer,
                   PasswordHashParams params, Millis ttl)
    : store_(std::move(store)), audit_(audit), clock_(clock), signer_(signer), params_(params), ttl_(ttl) {
    store_->replay([this](const json& j, std::size_t) {
        const auto t = j.at("t").get<std::string>();
        if (t == "user") {
            Account a;
            a.view.user_id = j.at("user_id").get<std::string>();
            a.password_hash = j.at("password_hash").get<std::string>();
            if (!j.at("public_key").is_null()) a.strong_key = decode_public_key(j.at("public_key").get<std::string>());
            a.view.has_strong_credential = a.strong_key.has_value();
            a.view.roles = j.at("roles").get<std::set<std::string>>();
            a.view.static_profile = j.at("static_profile").get<AttributeMap>();
            accounts_[a.view.user_id] = std::move(a);
        } else if (t == "prefs") {
            auto& prefs = accounts_.at(j.at("user_id").get<std::string>()).view.dynamic_preferences;
            for (const auto& [k, v] : j.at("delta").items()) prefs[k] = v.get<std::string>();
        } else {
            fail(ErrorCode::StorageCorrupt, "unknown account record type '" + t + "'");
        }
    });
}

UserAccount Identity::register_user(const std::string& user_id, const std::string& password,
                                    std::optional<PublicKey> public_key, std::set<std::string> roles,
                                    AttributeMap static_profile) {
    if (user_id.empty()) fail(ErrorCode::BadRequest, "empty user_id");
    if (password.size() < kMinPasswordLength)
        fail(ErrorCode::WeakPassword, "at least " + std::to_string(kMinPasswordLength) + " characters required");
    {
        std::shared_lock lock(mu_);
        if (accounts_.contains(user_id)) fail(ErrorCode::DuplicateUser, user_id);
    }
    // Hashing is deliberately slow; keep it outside the lock.
    Account a;
    a.password_hash = hash_password(password, params_);
    a.strong_key = public_key;
    a.view = {user_id, public_key.has_value(), std::move(roles), std::move(static_profile), {}};

    std::unique_lock lock(mu_);
    if (accounts_.contains(user_id)) fail(ErrorCode::DuplicateUser, user_id);
    audit_.record(AuditCategory::AuthEvent, std::nullopt, user_id, "register", Outcome::Ok,
                  a.strong_key ? "weak and strong credentials" : "weak credential");
    store_->append({{"t", "user"},
                    {"user_id", user_id},
                    {"password_hash", a.password_hash},
                    {"public_key", a.strong_key ? json(encode_public_key(*a.strong_key)) : json(nullptr)},
                    {"roles", a.view.roles},
                    {"static_profile", a.view.static_profile}});
    auto view = a.view;
    accounts_[user_id] = std::move(a);
    return view;
}

bool Identity::has_user(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    return accounts_.contains(user_id);
}

SsoToken Identity::issue(const std::string& user_id, AuthLevel level) {
    SsoToken t;
    t.token_id = new_uuid();
    t.subject = user_id;
    t.level = level;
    t.issued_at = clock_.now();
    t.expires_at = t.issued_at + ttl_;
    const json claims{{"exp", to_epoch_ms(t.expires_at)}, {"iat", to_epoch_ms(t.issued_at)},
                      {"lvl", to_string(level)},          {"scope", "framework"},
                      {"sub", user_id},                   {"tid", t.token_id}};
    const auto head = base64url_encode(to_bytes(claims.dump()));
    t.encoded = head + "." + base64url_encode(sign_detached(to_bytes(head), signer_.secret_key));
    audit_.record(AuditCategory::AuthEvent, t.token_id, user_id, "login", Outcome::Ok,
                  std::string(to_string(level)) + " token issued");
    return t;
}

SsoToken Identity::authenticate(const std::string& user_id, const std::string& password) {
    std::string hash;
    {
        std::shared_lock lock(mu_);
        if (auto it = accounts_.find(user_id); it != accounts_.end()) hash = it->second.password_hash;
    }
    if (hash.empty() || !check_password(hash, password)) {
        audit_.record(AuditCategory::AuthEvent, std::nullopt, user_id, "login", Outcome::Fault, "bad credential");
        fail(ErrorCode::BadCredential, "user id or password not accepted");
    }
    return issue(user_id, AuthLevel::Weak);
}

std::string Identity::issue_challenge(const std::string& user_id) {
    {
        std::shared_lock lock(mu_);
        auto it = accounts_.find(user_id);
        if (it == accounts_.end()) fail(ErrorCode::BadCredential, "user id not accepted");
        if (!it->second.strong_key) fail(ErrorCode::NoStrongCredential, user_id);
    }
    const auto nonce = base64_encode(random_bytes(kNonceBytes));
    const auto now = clock_.now();
    std::lock_guard lock(challenges_mu_);
    std::erase_if(challenges_, [&](const auto& c) { return c.second.expires_at <= now; });
    challenges_[nonce] = {user_id, now + kChallengeTtl};
    return nonce;
}

SsoToken Identity::authenticate_strong(const std::string& user_id, const std::string& nonce,
                                       const std::string& signature_b64) {
    std::optional<PublicKey> key;
    {
        std::shared_lock lock(mu_);
        auto it = accounts_.find(user_id);
        if (it == accounts_.end()) fail(ErrorCode::BadCredential, "user id not accepted");
        key = it->second.strong_key;
    }
    if (!key) fail(ErrorCode::NoStrongCredential, user_id);
    bool fresh = false;
    {
        std::lock_guard lock(challenges_mu_);
        auto it = challenges_.find(nonce);
        if (it != challenges_.end()) {
            fresh = it->second.user_id == user_id && it->second.expires_at > clock_.now();
            challenges_.erase(it);
        }
    }
    const auto nonce_bytes = base64_decode(nonce);
    const auto sig = base64_decode(signature_b64);
    if (!fresh || !nonce_bytes || !sig || !verify_detached(*nonce_bytes, *sig, *key)) {
        audit_.record(AuditCategory::AuthEvent, std::nullopt, user_id, "login", Outcome::Fault,
                      "challenge response rejected");
        fail(ErrorCode::BadCredential, "challenge response not accepted");
    }
    return issue(user_id, AuthLevel::Strong);
}

TokenClaims Identity::validate_token(const std::string& token) const {
    const auto dot = token.find('.');
    if (dot == std::string::npos) fail(ErrorCode::InvalidToken, "malformed token");
    const auto head = token.substr(0, dot);
    const auto payload = base64url_decode(head);
    const auto sig = base64url_decode(std::string_view(token).substr(dot + 1));
    if (!payload || !sig || !verify_detached(to_bytes(head), *sig, signer_.public_key))
        fail(ErrorCode::InvalidToken, "signature check failed");
    TokenClaims c;
    try {
        const auto j = json::parse(to_string(*payload));
        if (j.at("scope").get<std::string>() != "framework") fail(ErrorCode::InvalidToken, "wrong scope");
        auto level = parse_auth_level(j.at("lvl").get<std::string>());
        if (!level || *level == AuthLevel::None) fail(ErrorCode::InvalidToken, "bad level");
        c = {j.at("tid").get<std::string>(), j.at("sub").get<std::string>(), *level,
             from_epoch_ms(j.at("exp").get<std::int64_t>())};
    } catch (const json::exception&) {
        fail(ErrorCode::InvalidToken, "unreadable claims");
    }
    if (clock_.now() >= c.expires_at) fail(ErrorCode::ExpiredToken, "expired at " + format_timestamp(c.expires_at));
    return c;
}

AuthDecision Identity::authorize(const std::optional<std::string>& token, AuthLevel required) const {
    if (!token) {
        if (required == AuthLevel::None) return {true, "ok"};
        return {false, "missing"};
    }
    try {
        const auto claims = validate_token(*token);
        if (claims.level < required) return {false, "level"};
        return {true, "ok"};
    } catch (const Error& e) {
        return {false, e.code() == ErrorCode::ExpiredToken ? "expired" : "invalid"};
    } catch (...) {
        return {false, "invalid"};
    }
}

UserProfile Identity::get_profile(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    auto it = accounts_.find(user_id);
    if (it == accounts_.end()) fail(ErrorCode::UnknownUser, user_id);
    return {it->second.view.static_profile, it->second.view.dynamic_preferences};
}

AttributeMap Identity::update_preferences(const std::string& user_id, const AttributeMap& delta) {
    std::unique_lock lock(mu_);
    auto it = accounts_.find(user_id);
    if (it == accounts_.end()) fail(ErrorCode::UnknownUser, user_id);
    auto& view = it->second.view;
    for (const auto& [k, v] : delta)
        if (view.static_profile.contains(k) || static_attribute_names().contains(k))
            fail(ErrorCode::StaticAttributeViolation, "'" + k + "' belongs to the static profile");
    if (delta.empty()) return view.dynamic_preferences;
    store_->append({{"t", "prefs"}, {"user_id", user_id}, {"delta", delta}});
    for (const auto& [k, v] : delta) view.dynamic_preferences[k] = v;
    return view.dynamic_preferences;
}

UserAccount Identity::account(const std::string& user_id) const {
    std::shared_lock lock(mu_);
    auto it = accounts_.find(user_id);
    if (it == accounts_.end()) fail(ErrorCode::UnknownUser, user_id);
    return it->second.view;
}

bool Identity::has_role(const std::string& user_id, const std::string& role) const {
    std::shared_lock lock(mu_);
    auto it = accounts_.find(user_id);
    return it != accounts_.end() && it->second.view.roles.contains(role);
}

}  // namespace ssc
