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

#include "bsps/extmem.hpp"

#include <algorithm>
#include <string>

namespace bsps {

ExternalPool::ExternalPool(const ExternalPool& other) {
    std::lock_guard lock(other.mutex_);
    capacity_ = other.capacity_;
    max_token_ = other.max_token_;
    used_ = other.used_;
    streams_ = other.streams_;
}

ExternalPool& ExternalPool::operator=(const ExternalPool& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    capacity_ = other.capacity_;
    max_token_ = other.max_token_;
    used_ = other.used_;
    streams_ = other.streams_;
    return *this;
}

bool ExternalPool::operator==(const ExternalPool& other) const {
    if (capacity_ != other.capacity_ || used_ != other.used_ || streams_.size() != other.streams_.size()) return false;
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        const auto& a = streams_[i];
        const auto& b = other.streams_[i];
        if (a.token_size != b.token_size || a.n_tokens != b.n_tokens || a.cursor != b.cursor || a.owner != b.owner ||
            a.data != b.data)
            return false;
    }
    return true;
}

StreamId ExternalPool::create(std::int64_t total_size, std::int64_t token_size, std::span<const Word> initial_data) {
    std::lock_guard lock(mutex_);
    if (token_size < 1) throw StreamError("token size must be >= 1");
    if (token_size > max_token_) {
        throw StreamError("token size " + std::to_string(token_size) + " exceeds local memory " +
                          std::to_string(max_token_));
    }
    if (total_size < 1 || total_size % token_size != 0) {
        throw StreamError("stream size " + std::to_string(total_size) + " is not a positive multiple of token size " +
                          std::to_string(token_size));
    }
    if (!initial_data.empty() && static_cast<std::int64_t>(initial_data.size()) != total_size) {
        throw StreamError("initial data has " + std::to_string(initial_data.size()) + " words, expected " +
                          std::to_string(total_size));
    }
    if (used_ + total_size > capacity_) {
        throw StreamError("external memory capacity exceeded: " + std::to_string(used_ + total_size) + " > " +
                          std::to_string(capacity_) + " words");
    }

    Stream s;
    s.id = static_cast<StreamId>(streams_.size());
    s.token_size = token_size;
    s.n_tokens = total_size / token_size;
    if (initial_data.empty()) {
        s.data.assign(static_cast<std::size_t>(total_size), Word{0});
    } else {
        s.data.assign(initial_data.begin(), initial_data.end());
    }
    used_ += total_size;
    streams_.push_back(std::move(s));
    return streams_.back().id;
}

Stream& ExternalPool::at(StreamId id) {
    if (id < 0 || id >= static_cast<StreamId>(streams_.size())) {
        throw StreamError("unknown stream " + std::to_string(id));
    }
    return streams_[static_cast<std::size_t>(id)];
}

const Stream& ExternalPool::stream(StreamId id) const { return const_cast<ExternalPool*>(this)->at(id); }

std::span<Word> ExternalPool::host_data(StreamId id) { return at(id).data; }

void ExternalPool::acquire(StreamId id, int core) {
    std::lock_guard lock(mutex_);
    auto& s = at(id);
    if (s.owner) throw StreamError("stream busy: stream " + std::to_string(id) + " is open on core " +
                                   std::to_string(*s.owner));
    s.owner = core;
}

void ExternalPool::release(StreamId id, int core) {
    std::lock_guard lock(mutex_);
    auto& s = at(id);
    if (s.owner != core) throw StreamError("stream " + std::to_string(id) + " is not open on this core");
    s.owner.reset();
}

void ExternalPool::set_cursor(StreamId id, std::int64_t cursor) {
    auto& s = at(id);
    if (cursor < 0 || cursor > s.n_tokens) {
        throw StreamError("cursor " + std::to_string(cursor) + " out of range [0, " + std::to_string(s.n_tokens) + "]");
    }
    s.cursor = cursor;
}

void ExternalPool::write_token(StreamId id, std::int64_t index, std::span<const Word> values) {
    auto& s = at(id);
    if (static_cast<std::int64_t>(values.size()) > s.token_size) {
        throw StreamError("write of " + std::to_string(values.size()) + " words exceeds token size " +
                          std::to_string(s.token_size));
    }
    if (index < 0 || index >= s.n_tokens) throw StreamError("token index out of range");
    std::copy(values.begin(), values.end(), s.data.begin() + index * s.token_size);
}

}  // namespace bsps
