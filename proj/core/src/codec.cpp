// SPDX-License-Identifier: Apache-2.0
#include "ssc/codec.hpp"

#include <sodium.h>

#include <cctype>
#include <stdexcept>

namespace ssc {

void crypto_init() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

namespace {

std::string encode(std::span<const std::uint8_t> data, int variant) {
    crypto_init();
    std::string out(sodium_base64_encoded_len(data.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
    out.resize(out.size() - 1);  // trailing NUL
    return out;
}

std::optional<Bytes> decode(std::string_view text, int variant) {
    crypto_init();
    Bytes out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end, variant) != 0)
        return std::nullopt;
    if (end != text.data() + text.size()) return std::nullopt;
    out.resize(len);
    if (encode(out, variant) != text) return std::nullopt;
    return out;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> data) {
    return encode(data, sodium_base64_VARIANT_ORIGINAL);
}

std::optional<Bytes> base64_decode(std::string_view text) { return decode(text, sodium_base64_VARIANT_ORIGINAL); }

std::string base64url_encode(std::span<const std::uint8_t> data) {
    return encode(data, sodium_base64_VARIANT_URLSAFE_NO_PADDING);
}

std::optional<Bytes> base64url_decode(std::string_view text) {
    return decode(text, sodium_base64_VARIANT_URLSAFE_NO_PADDING);
}

std::string hex_encode(std::span<const std::uint8_t> data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

Bytes random_bytes(std::size_t n) {
    crypto_init();
    Bytes out(n);
    randombytes_buf(out.data(), out.size());
    return out;
}

std::string new_uuid() {
    auto b = random_bytes(16);
    b[6] = static_cast<std::uint8_t>((b[6] & 0x0f) | 0x40);
    b[8] = static_cast<std::uint8_t>((b[8] & 0x3f) | 0x80);
    const auto h = hex_encode(b);
    return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" + h.substr(16, 4) + "-" +
           h.substr(20, 12);
}

std::string stable_uuid(std::string_view text) {
    crypto_init();
    Bytes h(16);
    crypto_generichash(h.data(), h.size(), reinterpret_cast<const unsigned char*>(text.data()), text.size(), nullptr,
                       0);
    h[6] = static_cast<std::uint8_t>((h[6] & 0x0f) | 0x40);
    h[8] = static_cast<std::uint8_t>((h[8] & 0x3f) | 0x80);
    const auto hex = hex_encode(h);
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" + hex.substr(16, 4) + "-" +
           hex.substr(20, 12);
}

bool looks_like_uuid(std::string_view s) {
    if (s.size() != 36) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == 8 || i == 13 || i == 18 || i == 23) {
            if (s[i] != '-') return false;
        } else if (!std::isxdigit(static_cast<unsigned char>(s[i]))) {
            return false;
        }
    }
    return true;
}

}  // namespace ssc
