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
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "bsps/machine.hpp"

namespace bsps {

using StreamId = std::int64_t;

/// Token sequence in external memory. All sizes are in words.
struct Stream {
    StreamId id = 0;
    std::int64_t token_size = 0;
    std::int64_t n_tokens = 0;
    std::vector<Word> data;
    std::int64_t cursor = 0;
    std::optional<int> owner;

    std::span<const Word> token(std::int64_t index) const {
        return {data.data() + index * token_size, static_cast<std::size_t>(token_size)};
    }
    std::int64_t footprint() const { return n_tokens * token_size; }
};

/// Shared external memory of capacity E holding every stream.
///
/// Streams are numbered densely from 0 in creation order. Ownership changes
/// (open/close) and creation are serialized by an internal mutex; token
/// access goes through the owning core only.
class ExternalPool {
public:
    explicit ExternalPool(const MachineParams& m) : capacity_(m.E), max_token_(m.L) {}
    ExternalPool(std::int64_t capacity, std::int64_t max_token_size = std::numeric_limits<std::int64_t>::max())
        : capacity_(capacity), max_token_(max_token_size) {}

    ExternalPool(const ExternalPool& other);
    ExternalPool& operator=(const ExternalPool& other);

    /// Appends a closed stream with its cursor at 0. Absent data zero-fills.
    StreamId create(std::int64_t total_size, std::int64_t token_size, std::span<const Word> initial_data = {});

    const Stream& stream(StreamId id) const;
    /// Host-side mutable view of a stream's words (setup and readout only).
    std::span<Word> host_data(StreamId id);

    std::size_t stream_count() const { return streams_.size(); }
    std::int64_t used() const { return used_; }
    std::int64_t capacity() const { return capacity_; }
    std::int64_t max_token_size() const { return max_token_; }

    /// Grants exclusive ownership; throws "stream busy" if already owned.
    void acquire(StreamId id, int core);
    void release(StreamId id, int core);

    void set_cursor(StreamId id, std::int64_t cursor);
    void write_token(StreamId id, std::int64_t index, std::span<const Word> values);

    bool operator==(const ExternalPool& other) const;

private:
    Stream& at(StreamId id);

    std::int64_t capacity_;
    std::int64_t max_token_;
    std::int64_t used_ = 0;
    std::vector<Stream> streams_;
    mutable std::mutex mutex_;
};

/// Core-side reference to an open stream. Valid from a successful open until
/// the matching close on the same core.
struct StreamHandle {
    StreamId id = -1;
    int core = -1;
    std::uint64_t serial = 0;
    std::int64_t token_size = 0;
};

}  // namespace bsps
