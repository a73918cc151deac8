// SPDX-License-Identifier: Apache-2.0
#include "ssc/crypto.hpp"

#include "ssc/error.hpp"

#include <sodium.h>

#include <cstring>

namespace ssc {

SecretKey::~SecretKey() { sodium_memzero(bytes_.data(), bytes_.size()); }

namespace {

KeyPair from_seed(const std::array<std::uint8_t, 32>& seed) {
    crypto_init();
    KeyPair kp;
    std::array<std::uint8_t, 64> sk{};
    crypto_sign_seed_keypair(kp.public_key.bytes.data(), sk.data(), seed.data());
    kp.secret_key = SecretKey(sk);
    sodium_memzero(sk.data(), sk.size());
    return kp;
}

}  // namespace

KeyPair generate_keypair() {
    std::array<std::uint8_t, 32> seed{};
    crypto_init();
    randombytes_buf(seed.data(), seed.size());
    auto kp = from_seed(seed);
    sodium_memzero(seed.data(), seed.size());
    return kp;
}

KeyPair derive_keypair(std::string_view seed_text) {
    crypto_init();
    std::array<std::uint8_t, 32> seed{};
    crypto_generichash(seed.data(), seed.size(), reinterpret_cast<const unsigned char*>(seed_text.data()),
                       seed_text.size(), nullptr, 0);
    return from_seed(seed);
}

Bytes sign_detached(std::span<const std::uint8_t> message, const SecretKey& key) {
    crypto_init();
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.bytes().data());
    return sig;
}

bool verify_detached(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
                     const PublicKey& key) {
    crypto_init();
    if (signature.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), key.bytes.data()) == 0;
}

std::string encode_public_key(const PublicKey& key) { return base64_encode(key.bytes); }

PublicKey decode_public_key(std::string_view b64) {
    auto raw = base64_decode(b64);
    if (!raw || raw->size() != 32) fail(ErrorCode::BadRequest, "public key must be 32 bytes of base64");
    PublicKey pk;
    std::memcpy(pk.bytes.data(), raw->data(), 32);
    return pk;
}

std::string encode_secret_key(const SecretKey& key) { return base64_encode(key.bytes()); }

SecretKey decode_secret_key(std::string_view b64) {
    auto raw = base64_decode(b64);
    if (!raw || raw->size() != 64) fail(ErrorCode::BadRequest, "secret key must be 64 bytes of base64");
    std::array<std::uint8_t, 64> sk{};
    std::memcpy(sk.data(), raw->data(), 64);
    sodium_memzero(raw->data(), raw->size());
    return SecretKey(sk);
}

PasswordHashParams PasswordHashParams::interactive() {
    return {crypto_pwhash_OPSLIMIT_INTERACTIVE, crypto_pwhash_MEMLIMIT_INTERACTIVE};
}

PasswordHashParams PasswordHashParams::minimum() {
    return {crypto_pwhash_OPSLIMIT_MIN, crypto_pwhash_MEMLIMIT_MIN};
}

std::string hash_password(std::string_view password, const PasswordHashParams& params) {
    crypto_init();
    char out[crypto_pwhash_STRBYTES];
    if (crypto_pwhash_str_alg(out, password.data(), password.size(), params.ops_limit, params.mem_limit,
                              crypto_pwhash_ALG_ARGON2ID13) != 0)
        fail(ErrorCode::StorageFailure, "password hashing ran out of memory");
    return out;
}

bool check_password(std::string_view encoded_hash, std::string_view password) {
    crypto_init();
    const std::string h(encoded_hash);
    return crypto_pwhash_str_verify(h.c_str(), password.data(), password.size()) == 0;
}

}  // namespace ssc
