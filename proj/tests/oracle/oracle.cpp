// SPDX-License-Identifier: Apache-2.0
#include "oracle.hpp"

#include <cstdio>

namespace oracle {

std::string base64(const std::vector<std::uint8_t>& data) {
    static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        for (int s = 18; s >= 0; s -= 6) out.push_back(alphabet[(v >> s) & 63]);
    }
    const auto rest = data.size() - i;
    if (rest == 1) {
        const std::uint32_t v = data[i] << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    return out + "\"";
}

std::string canonical(const EnvelopeFields& f) {
    auto kv = [](const char* k, const std::string& v) { return json_string(k) + ":" + v; };
    std::string out = "{";
    out += kv("body", "{" + kv("content_type", json_string(f.content_type)) + "," +
                          kv("payload", json_string(base64(f.payload))) + "}");
    out += "," + kv("correlation_id", f.correlation ? json_string(*f.correlation) : "null");
    out += "," + kv("created_at", json_string(f.created_at));
    out += "," + kv("destination", "{" + kv("admin_id", json_string(f.dest_admin)) + "," +
                                       kv("service_id", json_string(f.dest_service)) + "}");
    out += "," + kv("envelope_id", json_string(f.envelope_id));
    out += "," + kv("message_kind", json_string(f.kind));
    out += "," + kv("profile", json_string(f.profile));
    out += "," + kv("sender", "{" + kv("admin_id", json_string(f.sender_admin)) + "," +
                                  kv("port_id", json_string(f.sender_port)) + "}");
    return out + "}";
}

std::string iso_timestamp(std::int64_t ms) {
    std::int64_t secs = ms / 1000;
    const int millis = static_cast<int>(ms % 1000);
    std::int64_t days = secs / 86400;
    const std::int64_t rem = secs % 86400;
    // Howard Hinnant's civil_from_days.
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const std::int64_t doe = days - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = yoe + era * 400;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
    const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lldT%02lld:%02lld:%02lld.%03dZ", static_cast<long long>(y),
                  static_cast<long long>(m), static_cast<long long>(d), static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60), millis);
    return buf;
}

}  // namespace oracle
