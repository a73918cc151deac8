// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/codec.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ssc {

inline constexpr std::string_view kEd25519 = "ed25519";

struct PublicKey {
    std::array<std::uint8_t, 32> bytes{};
    bool operator==(const PublicKey&) const = default;
};

/// Ed25519 secret key (libsodium layout: 32-byte seed followed by the public key).
/// Zeroed on destruction.
class SecretKey {
public:
    SecretKey() = default;
    explicit SecretKey(const std::array<std::uint8_t, 64>& raw) : bytes_(raw) {}
    SecretKey(const SecretKey&) = default;
    SecretKey& operator=(const SecretKey&) = default;
    ~SecretKey();

    std::span<const std::uint8_t, 64> bytes() const { return bytes_; }

private:
    std::array<std::uint8_t, 64> bytes_{};
};

struct KeyPair {
    PublicKey public_key;
    SecretKey secret_key;
};

KeyPair generate_keypair();
/// Deterministic key pair from an arbitrary seed string (hashed to 32 bytes).
/// Used by the harness so simulated administrations keep their identity across restarts.
KeyPair derive_keypair(std::string_view seed);

Bytes sign_detached(std::span<const std::uint8_t> message, const SecretKey& key);
bool verify_detached(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
                     const PublicKey& key);

std::string encode_public_key(const PublicKey& key);
/// Throws Error{BadRequest} on malformed input.
PublicKey decode_public_key(std::string_view b64);
std::string encode_secret_key(const SecretKey& key);
SecretKey decode_secret_key(std::string_view b64);

struct PasswordHashParams {
    unsigned long long ops_limit;
    std::size_t mem_limit;

    static PasswordHashParams interactive();
    /// Cheapest parameters libsodium accepts; for tests and scenarios.
    static PasswordHashParams minimum();
};

/// Argon2id, salted; returns the self-describing encoded string.
std::string hash_password(std::string_view password, const PasswordHashParams& params);
bool check_password(std::string_view encoded_hash, std::string_view password);

}  // namespace ssc
