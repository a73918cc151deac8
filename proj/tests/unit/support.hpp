// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/audit.hpp"
#include "ssc/clock.hpp"
#include "ssc/cooperation.hpp"
#include "ssc/envelope.hpp"
#include "ssc/harness.hpp"
#include "ssc/storage.hpp"

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

#include <unistd.h>

namespace ssc::test {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ssc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::unique_ptr<AppendLog> memory_log() { return std::make_unique<AppendLog>(); }

/// Keys, audit, routing and cooperation wired over in-memory stores.
struct World {
    ManualClock clock;
    KeyDirectory keys;
    FrameworkIdentity framework;
    AuditLog audit{memory_log(), clock};
    PortTable ports{clock};
    Cooperation coop;

    explicit World(Millis timeout = std::chrono::seconds(2))
        : coop(ports, keys, audit, clock, framework_with_key(), timeout) {
        keys.add_key(framework.admin_id, framework.key_id, framework.keys.public_key);
    }

    /// Registers the admin's key and routes all of its services to a simulated backend.
    SimulatedAdministration spawn(const std::string& admin_id, std::map<std::string, HandlerSpec> services) {
        auto admin = make_simulated_admin(admin_id, "test-seed", std::move(services));
        keys.ensure_key(admin.admin_id, admin.key_id, admin.keys.public_key);
        for (const auto& [sid, spec] : admin.services)
            coop.register_applicative_port(admin.admin_id, sid, "inproc://" + admin.admin_id);
        coop.attach_backend(admin.admin_id, std::make_shared<SimulatedBackend>(admin, keys, clock));
        return admin;
    }

    Envelope request(const SimulatedAdministration& from, const Destination& to, const std::string& text) {
        auto e = build_envelope({from.admin_id, "front"}, to, Profile::Sync, MessageKind::Request,
                                {"text/plain", to_bytes(text)}, std::nullopt, clock);
        return sign_envelope(e, from.keys.secret_key, from.key_id, keys);
    }

private:
    const FrameworkIdentity& framework_with_key() {
        framework.keys = derive_keypair("test-framework");
        return framework;
    }
};

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-./:\"\\\n\t\x01\x1f";
    std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s) c = alphabet[pick(rng)];
    // Sprinkle in multi-byte UTF-8 now and then.
    if (!s.empty() && rng() % 4 == 0) s += "\xc3\xa8\xe2\x82\xac";
    return s;
}

}  // namespace ssc::test
