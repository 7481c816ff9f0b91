/*
 * Copyright 2026 The bsps Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <atomic>
#include <numeric>
#include <sstream>

#include "bsps/runtime.hpp"
#include "runtime_properties.hpp"

using namespace bsps;

namespace {

MachineParams machine(std::int64_t p, double g = 1, double l = 10, double e = 1) {
    return MachineParams{.p = p, .r = 1, .g = g, .l = l, .e = e, .L = 256, .E = 4096};
}

}  // namespace

TEST_CASE("single sync") {
    ExternalPool pool(4096);
    auto trace = run_spmd(machine(4), pool, [](CoreContext& ctx) { ctx.sync(); });
    REQUIRE(trace.hypersteps.size() == 1);
    REQUIRE(trace.hypersteps[0].supersteps.size() == 1);
    const auto& ss = trace.hypersteps[0].supersteps[0];
    CHECK(ss.work == std::vector<double>(4, 0.0));
    CHECK(ss.sent == std::vector<std::int64_t>(4, 0));
    CHECK(ss.received == std::vector<std::int64_t>(4, 0));
    CHECK(ss.h == 0);
    CHECK(ss.synchronized);
    CHECK(trace.hypersteps[0].fetch == std::vector<std::int64_t>(4, 0));
    CHECK(bsps_cost(trace) == 10.0);
}

TEST_CASE("collective mismatch on sync count") {
    ExternalPool pool(4096);
    auto kernel = [](CoreContext& ctx) {
        ctx.sync();
        if (ctx.pid() == 0) ctx.sync();
    };
    CHECK_THROWS_WITH_AS(run_spmd(machine(4), pool, kernel), doctest::Contains("collective mismatch"), RuntimeError);
}

TEST_CASE("sync without communication costs max w + l") {
    ExternalPool pool(4096);
    auto trace = run_spmd(machine(3), pool, [](CoreContext& ctx) {
        ctx.charge_flops(10.0 * (ctx.pid() + 1));
        ctx.sync();
    });
    CHECK(bsps_cost(trace) == 30.0 + 10.0);
}

TEST_CASE("h-relation of an asymmetric exchange") {
    ExternalPool pool(4096);
    auto trace = run_spmd(machine(2), pool, [](CoreContext& ctx) {
        auto slot = ctx.register_slot(8);
        std::vector<Word> five(5, 1.0f), three(3, 2.0f);
        if (ctx.pid() == 0) ctx.put(1, slot, five);
        if (ctx.pid() == 1) ctx.put(0, slot, three);
        ctx.sync();
    });
    const auto& ss = trace.hypersteps[0].supersteps[0];
    CHECK(ss.sent == std::vector<std::int64_t>{5, 3});
    CHECK(ss.received == std::vector<std::int64_t>{3, 5});
    CHECK(ss.h == 5);
}

TEST_CASE("put is visible only after sync") {
    ExternalPool pool(4096);
    std::vector<Word> before(2), after(2);
    run_spmd(machine(2), pool, [&](CoreContext& ctx) {
        auto slot = ctx.register_slot(1);
        ctx.slot(slot)[0] = 7;
        Word v = 100.0f + static_cast<Word>(ctx.pid());
        ctx.put(1 - ctx.pid(), slot, std::span<const Word>(&v, 1));
        CHECK(ctx.current_sent() == 1);
        before[static_cast<std::size_t>(ctx.pid())] = ctx.slot(slot)[0];
        ctx.sync();
        after[static_cast<std::size_t>(ctx.pid())] = ctx.slot(slot)[0];
    });
    CHECK(before == std::vector<Word>{7, 7});
    CHECK(after == std::vector<Word>{101, 100});
}

TEST_CASE("put counters, self-put and tie-break") {
    ExternalPool pool(4096);
    Word last = 0;
    auto trace = run_spmd(machine(3), pool, [&](CoreContext& ctx) {
        auto slot = ctx.register_slot(4);
        std::vector<Word> four(4, static_cast<Word>(ctx.pid()));
        if (ctx.pid() == 0) ctx.put(0, slot, four);
        ctx.sync();
        // All cores write slot 0 of core 1; the highest source wins.
        Word v = 10.0f + static_cast<Word>(ctx.pid());
        ctx.put(1, slot, std::span<const Word>(&v, 1));
        ctx.sync();
        if (ctx.pid() == 1) last = ctx.slot(slot)[0];
    });
    const auto& first = trace.hypersteps[0].supersteps[0];
    CHECK(first.sent == std::vector<std::int64_t>{4, 0, 0});
    CHECK(first.received == std::vector<std::int64_t>{4, 0, 0});
    CHECK(first.h == 4);
    const auto& second = trace.hypersteps[0].supersteps[1];
    CHECK(second.received == std::vector<std::int64_t>{0, 3, 0});
    CHECK(last == 12.0f);
}

TEST_CASE("bad puts") {
    SUBCASE("unregistered slot") {
        ExternalPool pool(4096);
        auto kernel = [](CoreContext& ctx) {
            Word v = 1;
            ctx.put(1 - ctx.pid(), 3, std::span<const Word>(&v, 1));
            ctx.sync();
        };
        try {
            run_spmd(machine(2), pool, kernel);
            FAIL("expected an error");
        } catch (const RuntimeError& e) {
            CHECK(e.core() == 0);
            CHECK(std::string(e.what()).find("unregistered slot") != std::string::npos);
        }
    }
    SUBCASE("overflow") {
        ExternalPool pool(4096);
        auto kernel = [](CoreContext& ctx) {
            auto slot = ctx.register_slot(2);
            std::vector<Word> three(3);
            if (ctx.pid() == 1) ctx.put(0, slot, three);
            ctx.sync();
        };
        CHECK_THROWS_WITH_AS(run_spmd(machine(2), pool, kernel), doctest::Contains("core 1: put of 3 words overflows"),
                             RuntimeError);
    }
    SUBCASE("nonexistent core") {
        ExternalPool pool(4096);
        auto kernel = [](CoreContext& ctx) {
            auto slot = ctx.register_slot(1);
            Word v = 0;
            ctx.put(5, slot, std::span<const Word>(&v, 1));
        };
        CHECK_THROWS_AS(run_spmd(machine(2), pool, kernel), RuntimeError);
    }
    SUBCASE("exit before sync") {
        ExternalPool pool(4096);
        auto kernel = [](CoreContext& ctx) {
            auto slot = ctx.register_slot(1);
            Word v = 0;
            ctx.put(0, slot, std::span<const Word>(&v, 1));
        };
        CHECK_THROWS_WITH_AS(run_spmd(machine(2), pool, kernel), doctest::Contains("unsynchronized"), RuntimeError);
    }
}

TEST_CASE("broadcast") {
    SUBCASE("all cores broadcast one word") {
        const int p = 16;
        ExternalPool pool(4096);
        std::vector<Word> sums(p);
        auto trace = run_spmd(machine(p), pool, [&](CoreContext& ctx) {
            auto slot = ctx.register_slot(p);
            const Word mine = static_cast<Word>(ctx.pid() * ctx.pid() + 1);
            ctx.slot(slot)[static_cast<std::size_t>(ctx.pid())] = mine;
            ctx.broadcast(slot, std::span<const Word>(&mine, 1), ctx.pid());
            ctx.sync();
            auto s = ctx.slot(slot);
            sums[static_cast<std::size_t>(ctx.pid())] = std::accumulate(s.begin(), s.end(), Word{0});
        });
        const auto& ss = trace.hypersteps[0].supersteps[0];
        CHECK(ss.sent == std::vector<std::int64_t>(p, p - 1));
        CHECK(ss.received == std::vector<std::int64_t>(p, p - 1));
        CHECK(ss.h == p - 1);
        Word expected = 0;
        for (int s = 0; s < p; ++s) expected += static_cast<Word>(s * s + 1);
        CHECK(sums == std::vector<Word>(p, expected));
    }
    SUBCASE("single core") {
        ExternalPool pool(4096);
        auto trace = run_spmd(machine(1), pool, [](CoreContext& ctx) {
            auto slot = ctx.register_slot(1);
            Word v = 1;
            ctx.broadcast(slot, std::span<const Word>(&v, 1));
            ctx.sync();
        });
        CHECK(trace.hypersteps[0].supersteps[0].h == 0);
    }
}

TEST_CASE("charge_flops") {
    ExternalPool pool(4096);
    run_spmd(machine(1), pool, [](CoreContext& ctx) {
        ctx.charge_flops(0);
        CHECK(ctx.current_work() == 0.0);
        ctx.charge_flops(64);
        CHECK(ctx.current_work() == 64.0);
        ctx.charge_flops(128);
        CHECK(ctx.current_work() == 192.0);
        CHECK_THROWS_AS(ctx.charge_flops(-1), RuntimeError);
    });
}

TEST_CASE("hypersteps") {
    SUBCASE("no stream activity gives one hyperstep") {
        ExternalPool pool(4096);
        auto trace = run_spmd(machine(2), pool, [](CoreContext& ctx) {
            for (int i = 0; i < 3; ++i) {
                ctx.charge_flops(5);
                ctx.sync();
            }
        });
        REQUIRE(trace.hypersteps.size() == 1);
        CHECK(trace.hypersteps[0].supersteps.size() == 3);
        CHECK(max_fetch(trace.hypersteps[0]) == 0);
    }
    SUBCASE("token loop gives one hyperstep per iteration") {
        auto m = machine(2, 1, 10, 3);
        ExternalPool pool(m);
        pool.create(12, 3);
        pool.create(12, 3);
        auto trace = run_spmd(m, pool, [](CoreContext& ctx) {
            auto h = ctx.open(ctx.pid());
            for (int i = 0; i < 4; ++i) {
                ctx.move_down(h, true);
                ctx.charge_flops(2);
            }
            ctx.close(h);
        });
        REQUIRE(trace.hypersteps.size() == 4);
        for (const auto& h : trace.hypersteps) {
            CHECK(h.fetch == std::vector<std::int64_t>{3, 3});
            CHECK(hyperstep_bsp_cost(h, m) == 2.0);
            CHECK(classify(h, m) == Classification::BandwidthHeavy);
        }
        CHECK(bsps_cost(trace) == 4 * 9.0);
    }
    SUBCASE("one core consuming tokens alone is a mismatch") {
        auto m = machine(2);
        ExternalPool pool(m);
        pool.create(4, 1);
        auto kernel = [](CoreContext& ctx) {
            if (ctx.pid() == 0) {
                auto h = ctx.open(0);
                for (int i = 0; i < 3; ++i) {
                    ctx.move_down(h, false);
                    ctx.charge_flops(1);
                }
                ctx.close(h);
            }
        };
        CHECK_THROWS_WITH_AS(run_spmd(m, pool, kernel), doctest::Contains("collective mismatch"), RuntimeError);
        CHECK_FALSE(pool.stream(0).owner);
    }
    SUBCASE("boundaries charge no latency") {
        ExternalPool pool(4096);
        auto trace = run_spmd(machine(2), pool, [](CoreContext& ctx) {
            ctx.charge_flops(1);
            ctx.hyperstep_boundary();
            ctx.charge_flops(2);
            ctx.hyperstep_boundary();
            ctx.charge_flops(3);
            ctx.sync();
        });
        REQUIRE(trace.hypersteps.size() == 3);
        CHECK_FALSE(trace.hypersteps[0].supersteps[0].synchronized);
        CHECK(bsps_cost(trace) == 1 + 2 + 3 + 10.0);
    }
}

TEST_CASE("kernel errors carry the core id") {
    ExternalPool pool(4096);
    pool.create(4, 2);
    auto kernel = [](CoreContext& ctx) {
        if (ctx.pid() == 2) {
            auto h = ctx.open(0);
            ctx.seek(h, 5);
        }
        ctx.sync();
    };
    try {
        run_spmd(machine(4), pool, kernel);
        FAIL("expected an error");
    } catch (const RuntimeError& e) {
        CHECK(e.core() == 2);
        CHECK(std::string(e.what()).rfind("core 2: seek", 0) == 0);
    }
    CHECK_FALSE(pool.stream(0).owner);
}

TEST_CASE("budget overflow is reported at the offending call") {
    auto m = machine(2);
    m.L = 16;
    ExternalPool pool(m);
    auto kernel = [](CoreContext& ctx) {
        ctx.register_slot(10);
        if (ctx.pid() == 1) ctx.register_slot(7);
        ctx.sync();
    };
    CHECK_THROWS_WITH_AS(run_spmd(m, pool, kernel), doctest::Contains("core 1: scratchpad budget exceeded"),
                         RuntimeError);
}

TEST_CASE("runs are deterministic") {
    auto m = machine(4);
    auto once = [&] {
        ExternalPool pool(m);
        for (int i = 0; i < 4; ++i) pool.create(8, 2);
        auto trace = run_spmd(m, pool, [](CoreContext& ctx) {
            auto slot = ctx.register_slot(4);
            auto h = ctx.open(ctx.pid());
            for (int i = 0; i < 4; ++i) {
                auto t = ctx.move_down(h, true);
                ctx.charge_flops(static_cast<double>(ctx.pid() + i));
                std::vector<Word> v(t.begin(), t.end());
                v[0] += 1;
                ctx.put((ctx.pid() + i) % ctx.nprocs(), slot, v);
                ctx.sync();
            }
            ctx.close(h);
        });
        return std::pair{trace, pool};
    };
    auto [t0, p0] = once();
    for (int i = 0; i < 5; ++i) {
        auto [t, p] = once();
        CHECK(t == t0);
        CHECK(p == p0);
    }
}

TEST_CASE("randomized put patterns") {
    auto res = testing::check_put_visibility(300, 21);
    CHECK_MESSAGE(res.ok(), res.first_failure);
}

TEST_CASE("randomized collective mismatches") {
    auto res = testing::check_collective_mismatch(100, 22);
    CHECK_MESSAGE(res.ok(), res.first_failure);
}
