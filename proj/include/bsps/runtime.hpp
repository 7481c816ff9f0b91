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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bsps/cost.hpp"
#include "bsps/extmem.hpp"
#include "bsps/machine.hpp"

namespace bsps {

namespace detail {
class Engine;
}

using SlotId = int;

/// Per-core SPMD state handed to a kernel.
///
/// Cores run one at a time in ascending id order between rendezvous
/// points (sync and kernel exit), so every run is bit-reproducible.
/// Communication is buffered: a put issued in superstep i is applied at the
/// i-th sync. Tokens moved down and slots count against the local memory
/// budget L.
class CoreContext {
public:
    CoreContext(const CoreContext&) = delete;
    CoreContext& operator=(const CoreContext&) = delete;

    int pid() const { return id_; }
    int nprocs() const;
    const MachineParams& machine() const;

    // BSP primitives

    void sync();
    /// Queues a write into slot of core dest, starting at word offset.
    void put(int dest, SlotId slot, std::span<const Word> values, std::int64_t offset = 0);
    /// put to every other core.
    void broadcast(SlotId slot, std::span<const Word> values, std::int64_t offset = 0);
    void charge_flops(double amount);
    void hyperstep_boundary();

    /// Registers a communication buffer of the given length on this core.
    /// Slots are numbered per core in registration order.
    SlotId register_slot(std::int64_t length);
    std::span<Word> slot(SlotId id);
    std::span<const Word> slot(SlotId id) const;

    // Streams

    StreamHandle open(StreamId id);
    void close(StreamHandle& handle);
    /// Returns the token at the cursor and advances it. With preload the
    /// following token is staged in a second buffer.
    std::span<const Word> move_down(StreamHandle& handle, bool preload);
    /// Overwrites (a prefix of) the token at the cursor and advances it.
    /// wait charges e per word as local work; otherwise the store is free.
    void move_up(StreamHandle& handle, std::span<const Word> data, bool wait);
    void seek(StreamHandle& handle, std::int64_t delta_tokens);

    std::int64_t cursor(const StreamHandle& handle) const;
    std::optional<std::int64_t> staged_token(const StreamHandle& handle) const;

    // Introspection

    std::int64_t budget_used() const { return budget_used_; }
    double current_work() const { return segments_.back().work; }
    std::int64_t current_sent() const { return sent_; }

private:
    friend class detail::Engine;

    struct Segment {
        double work = 0.0;
        std::int64_t fetch = 0;
        bool dirty = false;
    };
    struct QueuedPut {
        int dest;
        SlotId slot;
        std::int64_t offset;
        std::vector<Word> values;
    };
    struct OpenStream {
        std::uint64_t serial = 0;
        std::int64_t token_size = 0;
        bool prefetch_reserved = false;
        std::optional<std::int64_t> staged_index;
        std::vector<Word> staged;
        std::vector<Word> current;
    };
    enum class Event { Running, Sync, Exit };

    CoreContext(detail::Engine& engine, int id) : engine_(&engine), id_(id) {}

    OpenStream& state(const StreamHandle& handle);
    const OpenStream& state(const StreamHandle& handle) const;
    void reserve(std::int64_t words, const char* what);
    void begin_hyperstep();

    detail::Engine* engine_;
    int id_;

    std::vector<std::vector<Word>> slots_;
    std::vector<QueuedPut> outbox_;
    std::int64_t sent_ = 0;
    std::vector<Segment> segments_{Segment{}};
    std::int64_t budget_used_ = 0;
    std::map<StreamId, OpenStream> open_;
    std::uint64_t next_serial_ = 1;
    Event event_ = Event::Running;
};

using Kernel = std::function<void(CoreContext&)>;

/// Runs p instances of kernel against the pool, which is mutated in place.
/// Throws RuntimeError on collective mismatch, budget overflow, a bad put,
/// or any error escaping a kernel (tagged with the core id).
Trace run_spmd(const MachineParams& m, ExternalPool& pool, const Kernel& kernel);

}  // namespace bsps
