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

#include "bsps/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace bsps {

namespace detail {

namespace {
// Unwinds a kernel when the run is aborted. Not derived from std::exception
// so kernels catching library errors do not swallow it.
struct Aborted {};
}  // namespace

class Engine {
public:
    Engine(const MachineParams& m, ExternalPool& pool, const Kernel& kernel) : m_(m), pool_(pool), kernel_(kernel) {
        const auto p = static_cast<int>(m.p);
        cores_.reserve(static_cast<std::size_t>(p));
        for (int s = 0; s < p; ++s) cores_.emplace_back(new CoreContext(*this, s));
        current_.fetch.assign(static_cast<std::size_t>(p), 0);
    }
    ~Engine() {
        for (auto* c : cores_) delete c;
    }

    Trace run() {
        std::vector<std::thread> threads;
        threads.reserve(cores_.size());
        for (int s = 0; s < static_cast<int>(cores_.size()); ++s) threads.emplace_back([this, s] { core_main(s); });
        for (auto& t : threads) t.join();

        for (auto* c : cores_) {
            for (auto& [id, os] : c->open_) pool_.release(id, c->id_);
            c->open_.clear();
        }
        if (error_) std::rethrow_exception(error_);
        return Trace{m_, std::move(hypersteps_)};
    }

    const MachineParams& machine() const { return m_; }
    ExternalPool& pool() { return pool_; }
    int nprocs() const { return static_cast<int>(cores_.size()); }

    void arrive(CoreContext& ctx, CoreContext::Event event) {
        std::unique_lock lock(mutex_);
        ctx.event_ = event;
        const auto my_round = round_;
        const int s = ctx.id_;
        if (s + 1 < nprocs()) {
            turn_ = s + 1;
        } else {
            resolve();
        }
        cv_.notify_all();
        if (event == CoreContext::Event::Exit) return;
        cv_.wait(lock, [&] { return aborted_ || (round_ != my_round && turn_ == s); });
        if (aborted_) throw Aborted{};
    }

private:
    void core_main(int s) {
        auto& ctx = *cores_[static_cast<std::size_t>(s)];
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return aborted_ || turn_ == s; });
            if (aborted_) return;
        }
        try {
            kernel_(ctx);
        } catch (const Aborted&) {
            return;
        } catch (const RuntimeError&) {
            fail(std::current_exception());
            return;
        } catch (const std::exception& ex) {
            fail(std::make_exception_ptr(RuntimeError(s, ex.what())));
            return;
        } catch (...) {
            fail(std::make_exception_ptr(RuntimeError(s, "unknown exception in kernel")));
            return;
        }
        arrive(ctx, CoreContext::Event::Exit);
    }

    void fail(std::exception_ptr error) {
        std::lock_guard lock(mutex_);
        abort_locked(std::move(error));
    }

    void abort_locked(std::exception_ptr error) {
        if (!error_) error_ = std::move(error);
        aborted_ = true;
        cv_.notify_all();
    }

    // Runs with the lock held once every core has reached a collective event.
    void resolve() {
        try {
            const auto kind = cores_.front()->event_;
            for (auto* c : cores_) {
                if (c->event_ != kind) {
                    throw RuntimeError(-1, "collective mismatch: " + describe_events());
                }
            }
            const auto boundaries = cores_.front()->segments_.size();
            for (auto* c : cores_) {
                if (c->segments_.size() != boundaries) {
                    throw RuntimeError(-1, "collective mismatch: core 0 crossed " + std::to_string(boundaries - 1) +
                                               " hyperstep boundaries, core " + std::to_string(c->id_) + " crossed " +
                                               std::to_string(c->segments_.size() - 1));
                }
            }
            if (kind == CoreContext::Event::Sync) {
                resolve_sync();
                ++round_;
                turn_ = 0;
            } else {
                resolve_exit();
            }
        } catch (const RuntimeError&) {
            abort_locked(std::current_exception());
        }
    }

    std::string describe_events() const {
        std::string syncing, exited;
        for (auto* c : cores_) {
            auto& dst = c->event_ == CoreContext::Event::Sync ? syncing : exited;
            if (!dst.empty()) dst += ",";
            dst += std::to_string(c->id_);
        }
        return "cores {" + syncing + "} called sync while cores {" + exited + "} exited";
    }

    // Closes every segment but the last as a partial superstep ending a
    // hyperstep; returns nothing, leaves the last segment to the caller.
    void close_boundaries() {
        const auto p = static_cast<std::size_t>(nprocs());
        const auto segments = cores_.front()->segments_.size();
        for (std::size_t j = 0; j + 1 < segments; ++j) {
            SuperstepRecord rec = partial_record(j);
            if (std::any_of(rec.work.begin(), rec.work.end(), [](double w) { return w != 0.0; })) {
                current_.supersteps.push_back(std::move(rec));
            }
            for (std::size_t s = 0; s < p; ++s) current_.fetch[s] += cores_[s]->segments_[j].fetch;
            hypersteps_.push_back(std::move(current_));
            current_ = HyperstepRecord{};
            current_.fetch.assign(p, 0);
        }
        for (std::size_t s = 0; s < p; ++s) current_.fetch[s] += cores_[s]->segments_.back().fetch;
    }

    SuperstepRecord partial_record(std::size_t segment) const {
        const auto p = static_cast<std::size_t>(nprocs());
        SuperstepRecord rec;
        rec.work.resize(p);
        rec.sent.assign(p, 0);
        rec.received.assign(p, 0);
        rec.synchronized = false;
        for (std::size_t s = 0; s < p; ++s) rec.work[s] = cores_[s]->segments_[segment].work;
        return rec;
    }

    void resolve_sync() {
        const auto p = static_cast<std::size_t>(nprocs());

        std::vector<std::int64_t> received(p, 0);
        for (auto* src : cores_) {
            for (const auto& put : src->outbox_) {
                auto& dst = *cores_[static_cast<std::size_t>(put.dest)];
                if (put.slot < 0 || put.slot >= static_cast<SlotId>(dst.slots_.size())) {
                    throw RuntimeError(src->id_, "put to unregistered slot " + std::to_string(put.slot) +
                                                     " on core " + std::to_string(put.dest));
                }
                if (put.offset + static_cast<std::int64_t>(put.values.size()) >
                    static_cast<std::int64_t>(dst.slots_[static_cast<std::size_t>(put.slot)].size())) {
                    throw RuntimeError(src->id_, "put of " + std::to_string(put.values.size()) +
                                                     " words overflows slot " + std::to_string(put.slot) +
                                                     " on core " + std::to_string(put.dest));
                }
                received[static_cast<std::size_t>(put.dest)] += static_cast<std::int64_t>(put.values.size());
            }
        }
        // Ascending source order: the highest source id writes last.
        for (auto* src : cores_) {
            for (auto& put : src->outbox_) {
                auto& slot = cores_[static_cast<std::size_t>(put.dest)]->slots_[static_cast<std::size_t>(put.slot)];
                std::copy(put.values.begin(), put.values.end(), slot.begin() + put.offset);
            }
        }

        close_boundaries();
        SuperstepRecord rec = partial_record(cores_.front()->segments_.size() - 1);
        rec.synchronized = true;
        for (std::size_t s = 0; s < p; ++s) {
            rec.sent[s] = cores_[s]->sent_;
            rec.received[s] = received[s];
        }
        rec.h = h_relation(rec.sent, rec.received);
        current_.supersteps.push_back(std::move(rec));

        for (auto* c : cores_) {
            c->outbox_.clear();
            c->sent_ = 0;
            c->segments_.assign(1, CoreContext::Segment{.dirty = true});
            c->event_ = CoreContext::Event::Running;
        }
    }

    void resolve_exit() {
        for (auto* c : cores_) {
            if (!c->outbox_.empty()) {
                throw RuntimeError(c->id_, "kernel exited with unsynchronized puts");
            }
        }
        close_boundaries();
        SuperstepRecord rec = partial_record(cores_.front()->segments_.size() - 1);
        if (std::any_of(rec.work.begin(), rec.work.end(), [](double w) { return w != 0.0; })) {
            current_.supersteps.push_back(std::move(rec));
        }
        const bool has_fetch = std::any_of(current_.fetch.begin(), current_.fetch.end(), [](auto v) { return v != 0; });
        if (hypersteps_.empty() || has_fetch || !current_.supersteps.empty()) {
            hypersteps_.push_back(std::move(current_));
        }
    }

    const MachineParams& m_;
    ExternalPool& pool_;
    const Kernel& kernel_;
    std::vector<CoreContext*> cores_;

    std::mutex mutex_;
    std::condition_variable cv_;
    int turn_ = 0;
    std::uint64_t round_ = 0;
    bool aborted_ = false;
    std::exception_ptr error_;

    std::vector<HyperstepRecord> hypersteps_;
    HyperstepRecord current_;
};

}  // namespace detail

int CoreContext::nprocs() const { return engine_->nprocs(); }

const MachineParams& CoreContext::machine() const { return engine_->machine(); }

void CoreContext::sync() { engine_->arrive(*this, Event::Sync); }

void CoreContext::put(int dest, SlotId slot, std::span<const Word> values, std::int64_t offset) {
    if (dest < 0 || dest >= nprocs()) throw RuntimeError(id_, "put to nonexistent core " + std::to_string(dest));
    if (offset < 0) throw RuntimeError(id_, "negative put offset");
    outbox_.push_back(QueuedPut{dest, slot, offset, std::vector<Word>(values.begin(), values.end())});
    sent_ += static_cast<std::int64_t>(values.size());
    segments_.back().dirty = true;
}

void CoreContext::broadcast(SlotId slot, std::span<const Word> values, std::int64_t offset) {
    for (int dest = 0; dest < nprocs(); ++dest) {
        if (dest != id_) put(dest, slot, values, offset);
    }
}

void CoreContext::charge_flops(double amount) {
    if (!(amount >= 0.0) || !std::isfinite(amount)) throw RuntimeError(id_, "work must be finite and >= 0");
    if (amount == 0.0) return;
    segments_.back().work += amount;
    segments_.back().dirty = true;
}

void CoreContext::begin_hyperstep() { segments_.push_back(Segment{}); }

void CoreContext::hyperstep_boundary() { begin_hyperstep(); }

void CoreContext::reserve(std::int64_t words, const char* what) {
    const auto limit = machine().L;
    if (budget_used_ + words > limit) {
        throw RuntimeError(id_, std::string("scratchpad budget exceeded by ") + what + ": " +
                                    std::to_string(budget_used_ + words) + " > L = " + std::to_string(limit) +
                                    " words");
    }
    budget_used_ += words;
}

SlotId CoreContext::register_slot(std::int64_t length) {
    if (length < 1) throw RuntimeError(id_, "slot length must be >= 1");
    reserve(length, "slot registration");
    slots_.emplace_back(static_cast<std::size_t>(length), Word{0});
    return static_cast<SlotId>(slots_.size() - 1);
}

std::span<Word> CoreContext::slot(SlotId id) {
    if (id < 0 || id >= static_cast<SlotId>(slots_.size())) throw RuntimeError(id_, "unregistered slot");
    return slots_[static_cast<std::size_t>(id)];
}

std::span<const Word> CoreContext::slot(SlotId id) const { return const_cast<CoreContext*>(this)->slot(id); }

CoreContext::OpenStream& CoreContext::state(const StreamHandle& handle) {
    auto it = open_.find(handle.id);
    if (handle.core != id_ || it == open_.end() || it->second.serial != handle.serial) {
        throw StreamError("invalid stream handle for stream " + std::to_string(handle.id));
    }
    return it->second;
}

const CoreContext::OpenStream& CoreContext::state(const StreamHandle& handle) const {
    return const_cast<CoreContext*>(this)->state(handle);
}

StreamHandle CoreContext::open(StreamId id) {
    auto& pool = engine_->pool();
    const auto& s = pool.stream(id);
    if (s.owner) {
        throw StreamError("stream busy: stream " + std::to_string(id) + " is open on core " + std::to_string(*s.owner));
    }
    reserve(s.token_size, "stream open");
    try {
        pool.acquire(id, id_);
    } catch (...) {
        budget_used_ -= s.token_size;
        throw;
    }
    OpenStream os;
    os.serial = next_serial_++;
    os.token_size = s.token_size;
    open_.emplace(id, std::move(os));
    return StreamHandle{id, id_, open_.at(id).serial, s.token_size};
}

void CoreContext::close(StreamHandle& handle) {
    auto& os = state(handle);
    engine_->pool().release(handle.id, id_);
    budget_used_ -= os.token_size * (os.prefetch_reserved ? 2 : 1);
    open_.erase(handle.id);
    handle.serial = 0;
}

std::span<const Word> CoreContext::move_down(StreamHandle& handle, bool preload) {
    auto& os = state(handle);
    auto& pool = engine_->pool();
    const auto& s = pool.stream(handle.id);
    if (s.cursor >= s.n_tokens) throw StreamError("end of stream " + std::to_string(handle.id));
    if (preload && !os.prefetch_reserved) {
        reserve(os.token_size, "prefetch buffer");
        os.prefetch_reserved = true;
    }

    if (segments_.back().dirty) begin_hyperstep();
    segments_.back().fetch += os.token_size;

    const auto index = s.cursor;
    if (os.staged_index == index) {
        os.current.swap(os.staged);
    } else {
        auto tok = s.token(index);
        os.current.assign(tok.begin(), tok.end());
    }
    os.staged_index.reset();
    pool.set_cursor(handle.id, index + 1);
    if (preload && index + 1 < s.n_tokens) {
        auto next = s.token(index + 1);
        os.staged.assign(next.begin(), next.end());
        os.staged_index = index + 1;
    }
    return os.current;
}

void CoreContext::move_up(StreamHandle& handle, std::span<const Word> data, bool wait) {
    auto& os = state(handle);
    auto& pool = engine_->pool();
    const auto& s = pool.stream(handle.id);
    if (static_cast<std::int64_t>(data.size()) > os.token_size) {
        throw StreamError("move_up of " + std::to_string(data.size()) + " words exceeds token size " +
                          std::to_string(os.token_size));
    }
    if (s.cursor >= s.n_tokens) throw StreamError("end of stream " + std::to_string(handle.id));

    const auto index = s.cursor;
    pool.write_token(handle.id, index, data);
    if (os.staged_index == index) os.staged_index.reset();
    pool.set_cursor(handle.id, index + 1);
    if (wait) charge_flops(machine().e * static_cast<double>(data.size()));
}

void CoreContext::seek(StreamHandle& handle, std::int64_t delta_tokens) {
    state(handle);
    auto& pool = engine_->pool();
    const auto& s = pool.stream(handle.id);
    const auto target = s.cursor + delta_tokens;
    if (target < 0 || target > s.n_tokens) {
        throw StreamError("seek to token " + std::to_string(target) + " outside [0, " + std::to_string(s.n_tokens) +
                          "]");
    }
    pool.set_cursor(handle.id, target);
}

std::int64_t CoreContext::cursor(const StreamHandle& handle) const {
    state(handle);
    return engine_->pool().stream(handle.id).cursor;
}

std::optional<std::int64_t> CoreContext::staged_token(const StreamHandle& handle) const {
    return state(handle).staged_index;
}

Trace run_spmd(const MachineParams& m, ExternalPool& pool, const Kernel& kernel) {
    validate(m);
    if (pool.used() > m.E) throw RuntimeError(-1, "pool holds more than E words");
    for (std::size_t i = 0; i < pool.stream_count(); ++i) {
        const auto& s = pool.stream(static_cast<StreamId>(i));
        if (s.token_size > m.L) {
            throw RuntimeError(-1, "stream " + std::to_string(i) + " has tokens larger than L");
        }
        if (s.owner) throw RuntimeError(-1, "stream " + std::to_string(i) + " is still open");
    }
    detail::Engine engine(m, pool, kernel);
    return engine.run();
}

}  // namespace bsps
