// SPDX-License-Identifier: Apache-2.0
#include "ssc/gateway.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ssc;

namespace {

GatewayConfig bench_config() {
    GatewayConfig c;
    c.framework_key_seed = "bench";
    c.password_params = PasswordHashParams::minimum();
    return c;
}

Envelope sample_request(const Clock& clock, std::size_t payload_size) {
    return build_envelope({"comune_a", "front"}, {"comune_b", "cert"}, Profile::Sync, MessageKind::Request,
                          {"application/octet-stream", Bytes(payload_size, 0x5a)}, std::nullopt, clock);
}

void BM_Sign(benchmark::State& state) {
    SystemClock clock;
    KeyDirectory keys;
    const auto kp = derive_keypair("bench-sign");
    keys.add_key("comune_a", "k1", kp.public_key);
    const auto e = sample_request(clock, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sign_envelope(e, kp.secret_key, "k1", keys));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sign)->Arg(64)->Arg(4096)->Arg(65536);

void BM_Verify(benchmark::State& state) {
    SystemClock clock;
    KeyDirectory keys;
    const auto kp = derive_keypair("bench-verify");
    keys.add_key("comune_a", "k1", kp.public_key);
    const auto e = sign_envelope(sample_request(clock, static_cast<std::size_t>(state.range(0))), kp.secret_key, "k1",
                                 keys);
    for (auto _ : state) benchmark::DoNotOptimize(verify_envelope(e, keys));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Verify)->Arg(64)->Arg(4096)->Arg(65536);

void BM_SerializeParse(benchmark::State& state) {
    SystemClock clock;
    const auto e = sample_request(clock, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(parse_envelope(serialize_envelope(e)));
}
BENCHMARK(BM_SerializeParse)->Arg(64)->Arg(4096);

void BM_SyncExchange(benchmark::State& state) {
    Gateway gw(bench_config());
    const auto a = make_simulated_admin("comune_a", "bench", {{"echo", {}}});
    gw.spawn_simulated_admin(a);
    for (auto _ : state) {
        state.PauseTiming();
        auto e = build_envelope({a.admin_id, "front"}, {a.admin_id, "echo"}, Profile::Sync, MessageKind::Request,
                                {"text/plain", to_bytes("ping")}, std::nullopt, gw.clock());
        e = sign_envelope(e, a.keys.secret_key, a.key_id, gw.keys());
        state.ResumeTiming();
        benchmark::DoNotOptimize(gw.cooperation().exchange_sync(e));
    }
}
BENCHMARK(BM_SyncExchange);

void BM_Publish(benchmark::State& state) {
    Gateway gw(bench_config());
    const auto a = make_simulated_admin("comune_a", "bench", {});
    gw.spawn_simulated_admin(a);
    gw.events().create_topic("bench.t");
    for (int s = 0; s < state.range(0); ++s) gw.events().subscribe({"sub" + std::to_string(s), "in"}, "bench.t", true);
    for (auto _ : state) {
        state.PauseTiming();
        auto e = build_envelope({a.admin_id, "events"}, {a.admin_id, "bench.t"}, Profile::AsyncEvent,
                                MessageKind::Event, {"text/plain", to_bytes("evt")}, std::nullopt, gw.clock());
        e = sign_envelope(e, a.keys.secret_key, a.key_id, gw.keys());
        state.ResumeTiming();
        benchmark::DoNotOptimize(gw.events().publish(e, "bench.t"));
    }
}
BENCHMARK(BM_Publish)->Arg(0)->Arg(5);

void BM_FindByLifeEvent(benchmark::State& state) {
    Registry reg(std::make_unique<AppendLog>(), [](const Binding&) { return true; });
    std::mt19937_64 rng(42);
    const int nodes = static_cast<int>(state.range(0));
    for (int n = 0; n < nodes; ++n)
        reg.add_life_event("n" + std::to_string(n), "node",
                           n ? std::optional<std::string>("n" + std::to_string(rng() % n)) : std::nullopt);
    for (int d = 0; d < nodes * 2; ++d) {
        ServiceDescriptor sd;
        sd.service_id = "svc" + std::to_string(d);
        sd.provider_admin_id = "adm" + std::to_string(d % 13);
        sd.life_events.insert("n" + std::to_string(rng() % nodes));
        sd.binding = EventTopicBinding{"t"};
        reg.register_service(sd);
    }
    for (auto _ : state) benchmark::DoNotOptimize(reg.find_by_life_event("n0"));
}
BENCHMARK(BM_FindByLifeEvent)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
