// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssc {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(std::span<const std::uint8_t> b) { return std::string(b.begin(), b.end()); }

/// RFC 4648 base64 with padding.
std::string base64_encode(std::span<const std::uint8_t> data);
/// Rejects anything that would not re-encode to exactly `text` (bad alphabet,
/// missing padding, non-zero trailing bits), so every byte of the text is significant.
std::optional<Bytes> base64_decode(std::string_view text);

/// Unpadded URL-safe variant used inside bearer tokens.
std::string base64url_encode(std::span<const std::uint8_t> data);
std::optional<Bytes> base64url_decode(std::string_view text);

std::string hex_encode(std::span<const std::uint8_t> data);

/// Random RFC 4122 version-4 identifier, lowercase hex.
std::string new_uuid();
/// UUID-shaped identifier derived from `text`; the same text always yields the
/// same id, which makes retried submissions idempotent.
std::string stable_uuid(std::string_view text);
bool looks_like_uuid(std::string_view s);

Bytes random_bytes(std::size_t n);

/// Initializes libsodium once; safe to call repeatedly from any thread.
void crypto_init();

}  // namespace ssc
