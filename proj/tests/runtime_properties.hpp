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

#pragma once

// Randomized put patterns checked against an independent recount of t, r, h
// and against the BSP visibility rule. Shared by unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bsps/runtime.hpp"

namespace bsps::testing {

struct PutPattern {
    int src;
    int dest;
    std::int64_t offset;
    std::int64_t length;
};

struct VisibilityResult {
    int cases = 0;
    int failures = 0;
    std::string first_failure;
    void fail(int c, const std::string& what) {
        if (failures++ == 0) first_failure = "case " + std::to_string(c) + ": " + what;
    }
    bool ok() const { return failures == 0; }
};

inline VisibilityResult check_put_visibility(int cases, std::uint64_t seed) {
    VisibilityResult res;
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c, ++res.cases) {
        const int p = 1 + static_cast<int>(rng() % 6);
        const std::int64_t slot_len = 4 + static_cast<std::int64_t>(rng() % 12);
        const int supersteps = 1 + static_cast<int>(rng() % 3);
        MachineParams m{.p = p, .r = 1, .g = 1.5, .l = 3, .e = 0, .L = 64, .E = 64};

        std::vector<std::vector<PutPattern>> rounds(static_cast<std::size_t>(supersteps));
        for (auto& round : rounds) {
            const int puts = static_cast<int>(rng() % 10);
            for (int i = 0; i < puts; ++i) {
                PutPattern pp;
                pp.src = static_cast<int>(rng() % static_cast<std::uint64_t>(p));
                pp.dest = static_cast<int>(rng() % static_cast<std::uint64_t>(p));
                pp.offset = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(slot_len));
                pp.length = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(slot_len - pp.offset));
                round.push_back(pp);
            }
        }
        // Word value encodes (superstep, put index, position) so every write is distinct.
        auto value = [](int round, std::size_t put, std::int64_t i) {
            return static_cast<Word>(round * 10000 + static_cast<int>(put) * 100 + static_cast<int>(i));
        };

        // Expected slot contents after each sync, applied in ascending source order.
        std::vector<std::vector<std::vector<Word>>> expected;
        std::vector<std::vector<Word>> slots(static_cast<std::size_t>(p),
                                             std::vector<Word>(static_cast<std::size_t>(slot_len), -1.0f));
        for (int r = 0; r < supersteps; ++r) {
            const auto& round = rounds[static_cast<std::size_t>(r)];
            for (int src = 0; src < p; ++src) {
                for (std::size_t k = 0; k < round.size(); ++k) {
                    if (round[k].src != src) continue;
                    for (std::int64_t i = 0; i < round[k].length; ++i) {
                        slots[static_cast<std::size_t>(round[k].dest)][static_cast<std::size_t>(round[k].offset + i)] =
                            value(r, k, i);
                    }
                }
            }
            expected.push_back(slots);
        }

        ExternalPool pool(m);
        std::vector<std::vector<std::vector<Word>>> before(static_cast<std::size_t>(supersteps)),
            after(static_cast<std::size_t>(supersteps));
        for (auto& v : before) v.resize(static_cast<std::size_t>(p));
        for (auto& v : after) v.resize(static_cast<std::size_t>(p));

        auto trace = run_spmd(m, pool, [&](CoreContext& ctx) {
            const auto slot = ctx.register_slot(slot_len);
            std::fill(ctx.slot(slot).begin(), ctx.slot(slot).end(), -1.0f);
            const auto me = static_cast<std::size_t>(ctx.pid());
            for (int r = 0; r < supersteps; ++r) {
                const auto& round = rounds[static_cast<std::size_t>(r)];
                for (std::size_t k = 0; k < round.size(); ++k) {
                    if (round[k].src != ctx.pid()) continue;
                    std::vector<Word> vals(static_cast<std::size_t>(round[k].length));
                    for (std::int64_t i = 0; i < round[k].length; ++i) vals[static_cast<std::size_t>(i)] = value(r, k, i);
                    ctx.put(round[k].dest, slot, vals, round[k].offset);
                }
                auto s = ctx.slot(slot);
                before[static_cast<std::size_t>(r)][me].assign(s.begin(), s.end());
                ctx.sync();
                s = ctx.slot(slot);
                after[static_cast<std::size_t>(r)][me].assign(s.begin(), s.end());
            }
        });

        if (trace.hypersteps.size() != 1) {
            res.fail(c, "expected a single hyperstep");
            continue;
        }
        const auto& steps = trace.hypersteps[0].supersteps;
        if (static_cast<int>(steps.size()) != supersteps) {
            res.fail(c, "superstep count");
            continue;
        }
        for (int r = 0; r < supersteps; ++r) {
            const auto& round = rounds[static_cast<std::size_t>(r)];
            std::vector<std::int64_t> t(static_cast<std::size_t>(p), 0), rcv(static_cast<std::size_t>(p), 0);
            for (const auto& pp : round) {
                t[static_cast<std::size_t>(pp.src)] += pp.length;
                rcv[static_cast<std::size_t>(pp.dest)] += pp.length;
            }
            std::int64_t h = 0;
            for (int s = 0; s < p; ++s) {
                h = std::max(h, std::max(t[static_cast<std::size_t>(s)], rcv[static_cast<std::size_t>(s)]));
            }
            const auto& rec = steps[static_cast<std::size_t>(r)];
            if (rec.sent != t || rec.received != rcv) res.fail(c, "t/r recount differs");
            if (rec.h != h) res.fail(c, "h recount differs");
            for (int s = 0; s < p; ++s) {
                const auto& prev = r == 0 ? std::vector<Word>(static_cast<std::size_t>(slot_len), -1.0f)
                                          : expected[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(s)];
                if (before[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] != prev) {
                    res.fail(c, "write visible before sync");
                }
                if (after[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)] !=
                    expected[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)]) {
                    res.fail(c, "slot contents after sync differ");
                }
            }
        }
    }
    return res;
}

/// Kernels where one core skips a sync or a hyperstep boundary must fail
/// every time with the same message.
inline VisibilityResult check_collective_mismatch(int cases, std::uint64_t seed) {
    VisibilityResult res;
    std::mt19937_64 rng(seed);
    for (int c = 0; c < cases; ++c, ++res.cases) {
        const int p = 2 + static_cast<int>(rng() % 7);
        const int odd = static_cast<int>(rng() % static_cast<std::uint64_t>(p));
        const int syncs = 1 + static_cast<int>(rng() % 3);
        const bool skip_boundary = rng() % 2;
        MachineParams m{.p = p, .r = 1, .g = 1, .l = 1, .e = 1, .L = 64, .E = 64};
        auto kernel = [&](CoreContext& ctx) {
            for (int i = 0; i < syncs; ++i) {
                ctx.charge_flops(1);
                if (skip_boundary) {
                    if (ctx.pid() != odd || i + 1 < syncs) ctx.hyperstep_boundary();
                    ctx.sync();
                } else if (ctx.pid() != odd || i + 1 < syncs) {
                    ctx.sync();
                }
            }
        };
        std::string first;
        for (int rep = 0; rep < 3; ++rep) {
            ExternalPool pool(m);
            try {
                run_spmd(m, pool, kernel);
                res.fail(c, "mismatch not detected");
            } catch (const RuntimeError& e) {
                if (std::string(e.what()).find("collective mismatch") == std::string::npos) {
                    res.fail(c, std::string("unexpected error: ") + e.what());
                }
                if (rep == 0) first = e.what();
                else if (first != e.what()) res.fail(c, "error differs between runs");
            }
        }
    }
    return res;
}

}  // namespace bsps::testing
