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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsps/block_matrix.hpp"
#include "bsps/cost.hpp"
#include "bsps/extmem.hpp"
#include "bsps/runtime.hpp"

namespace bsps {

// ---------------------------------------------------------------------------
// Fixtures

/// 64-bit linear congruential generator, x <- a x + c (mod 2^64) with
/// a = 6364136223846793005, c = 1442695040888963407. uniform() takes the top
/// 24 bits of the new state: ((x >> 40) / 2^24) * 2 - 1, in [-1, 1).
class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return state_;
    }
    float uniform() { return static_cast<float>(static_cast<double>(next() >> 40) / 16777216.0 * 2.0 - 1.0); }

private:
    std::uint64_t state_;
};

std::vector<Word> uniform_vector(std::int64_t length, std::uint64_t seed);
BlockMatrixf uniform_matrix(std::int64_t order, std::uint64_t seed);
BlockMatrixf identity_matrix(std::int64_t order);
BlockMatrixf constant_matrix(std::int64_t order, Word value);

/// Raw little-endian 4-byte floats.
std::vector<Word> read_words(const std::string& path);
void write_words(const std::string& path, std::span<const Word> words);

// ---------------------------------------------------------------------------
// Inner product

struct CyclicStreams {
    std::vector<StreamId> v;  ///< one per core
    std::vector<StreamId> u;
};

/// Component i goes to core i mod p; each core's share is chunked into
/// tokens of token_size words in index order. Creates all v streams, then
/// all u streams.
CyclicStreams build_cyclic_streams(std::span<const Word> v, std::span<const Word> u, std::int64_t p,
                                   std::int64_t token_size, ExternalPool& pool);

/// Sum of a_i b_i; charges 2|a|.
Word dot_block(CoreContext& ctx, std::span<const Word> a, std::span<const Word> b);

/// Streams n_hypersteps token pairs, then shares the partial sums through
/// `partials` (p words) and returns the full inner product on every core.
Word inner_product_kernel(CoreContext& ctx, const CyclicStreams& streams, std::int64_t n_hypersteps,
                          SlotId partials);

struct InnerProductRun {
    std::vector<Word> alpha;  ///< result seen by each core
    Trace trace;
};

InnerProductRun run_inner_product(const MachineParams& m, std::span<const Word> v, std::span<const Word> u,
                                  std::int64_t token_size);

// ---------------------------------------------------------------------------
// Cannon

/// 1-based (row, column) position on the N x N core grid.
struct GridPos {
    std::int64_t row = 0;
    std::int64_t col = 0;
    bool operator==(const GridPos&) const = default;
};

/// Row-major: linear id s -> (1 + s div N, 1 + s mod N).
GridPos grid_position(int core, std::int64_t grid);
int grid_core(GridPos pos, std::int64_t grid);

/// Initial skew (1-based): A_ij -> (i, 1 + ((j - i) mod N)),
/// B_ij -> (1 + ((i - j) mod N), j).
std::pair<GridPos, GridPos> cannon_initial_placement(std::int64_t i, std::int64_t j, std::int64_t grid);

/// Index j' of the A_{s,j'} B_{j',t} product core (s,t) forms in step k:
/// j' = 1 + ((s + t + k - 3) mod N).
std::int64_t cannon_step_index(std::int64_t s, std::int64_t t, std::int64_t step, std::int64_t grid);

/// c += a b for k x k row-major blocks; charges 2k^3.
void gemm_block(CoreContext& ctx, std::span<const Word> a, std::span<const Word> b, std::span<Word> c,
                std::int64_t k);

/// N supersteps of multiply-accumulate followed by shifting the A block one
/// core left and the B block one core up (k^2 words each).
void cannon_onchip(CoreContext& ctx, SlotId a_block, SlotId b_block, std::span<Word> c_accumulator,
                   std::int64_t grid, std::int64_t k);

struct CannonPlan {
    std::int64_t n = 0;
    std::int64_t grid = 0;   ///< N
    std::int64_t outer = 0;  ///< M
    std::int64_t k = 0;

    std::int64_t token_words() const { return k * k; }
};

/// Validates N^2 = p and N M | n.
CannonPlan make_cannon_plan(std::int64_t n, std::int64_t grid, std::int64_t outer, std::int64_t p);

struct CannonStreams {
    StreamId a = -1;
    StreamId b = -1;
    StreamId c = -1;
};

/// Per core (s,t): A's M^2 inner blocks in row-major outer order, B's in
/// column-major outer order, each already skewed for the first on-chip
/// step, plus a zeroed output stream of M^2 tokens.
std::vector<CannonStreams> build_cannon_streams(const BlockMatrixf& a, const BlockMatrixf& b, const CannonPlan& plan,
                                                ExternalPool& pool);

/// Streamed Cannon for one core: M^3 hypersteps; output block (i,j) is
/// written to token (i-1) M + (j-1) of the core's C stream.
void cannon_multilevel_kernel(CoreContext& ctx, const CannonPlan& plan, const std::vector<CannonStreams>& streams);

/// Rebuilds C from every core's output stream.
BlockMatrixf reassemble_cannon(const ExternalPool& pool, const CannonPlan& plan,
                               const std::vector<CannonStreams>& streams);

struct CannonRun {
    BlockMatrixf c;
    Trace trace;
};

CannonRun run_cannon(const MachineParams& m, const BlockMatrixf& a, const BlockMatrixf& b, const CannonPlan& plan);

/// O(n^3) reference product accumulated in double precision.
BlockMatrixf reference_multiply(const BlockMatrixf& a, const BlockMatrixf& b);

}  // namespace bsps
