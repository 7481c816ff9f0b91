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

#include "bsps/algorithms.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace bsps {

namespace {

std::int64_t mod(std::int64_t a, std::int64_t n) { return ((a % n) + n) % n; }

void check_index(std::int64_t v, std::int64_t grid, const char* what) {
    if (v < 1 || v > grid) {
        throw std::out_of_range(std::string(what) + " index " + std::to_string(v) + " outside [1, " +
                                std::to_string(grid) + "]");
    }
}

std::uint32_t byteswap32(std::uint32_t x) {
    return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

}  // namespace

// ---------------------------------------------------------------------------
// Fixtures

std::vector<Word> uniform_vector(std::int64_t length, std::uint64_t seed) {
    Lcg64 rng(seed);
    std::vector<Word> out(static_cast<std::size_t>(length));
    for (auto& x : out) x = rng.uniform();
    return out;
}

BlockMatrixf uniform_matrix(std::int64_t order, std::uint64_t seed) {
    Lcg64 rng(seed);
    BlockMatrixf out(order);
    for (Eigen::Index r = 0; r < order; ++r) {
        for (Eigen::Index c = 0; c < order; ++c) out.dense()(r, c) = rng.uniform();
    }
    return out;
}

BlockMatrixf identity_matrix(std::int64_t order) {
    return BlockMatrixf(BlockMatrixf::Dense::Identity(order, order));
}

BlockMatrixf constant_matrix(std::int64_t order, Word value) {
    return BlockMatrixf(BlockMatrixf::Dense::Constant(order, order, value));
}

std::vector<Word> read_words(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0) throw std::runtime_error("'" + path + "' is not a whole number of 4-byte words");
    std::vector<Word> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t raw;
        std::memcpy(&raw, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) raw = byteswap32(raw);
        out[i] = std::bit_cast<Word>(raw);
    }
    return out;
}

void write_words(const std::string& path, std::span<const Word> words) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (Word w : words) {
        auto raw = std::bit_cast<std::uint32_t>(w);
        if constexpr (std::endian::native == std::endian::big) raw = byteswap32(raw);
        out.write(reinterpret_cast<const char*>(&raw), 4);
    }
}

// ---------------------------------------------------------------------------
// Inner product

CyclicStreams build_cyclic_streams(std::span<const Word> v, std::span<const Word> u, std::int64_t p,
                                   std::int64_t token_size, ExternalPool& pool) {
    if (v.size() != u.size()) throw std::invalid_argument("vectors differ in length");
    if (p < 1 || token_size < 1) throw std::invalid_argument("p and token size must be positive");
    const auto len = static_cast<std::int64_t>(v.size());
    if (len == 0 || len % (p * token_size) != 0) {
        throw std::invalid_argument("p * C = " + std::to_string(p * token_size) + " does not divide vector length " +
                                    std::to_string(len));
    }
    const auto share = len / p;

    auto distribute = [&](std::span<const Word> x) {
        std::vector<StreamId> ids;
        std::vector<Word> local(static_cast<std::size_t>(share));
        for (std::int64_t s = 0; s < p; ++s) {
            for (std::int64_t i = 0; i < share; ++i) local[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i * p + s)];
            ids.push_back(pool.create(share, token_size, local));
        }
        return ids;
    };
    CyclicStreams out;
    out.v = distribute(v);
    out.u = distribute(u);
    return out;
}

Word dot_block(CoreContext& ctx, std::span<const Word> a, std::span<const Word> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot_block operands differ in length");
    Eigen::Map<const Eigen::VectorXf> va(a.data(), static_cast<Eigen::Index>(a.size()));
    Eigen::Map<const Eigen::VectorXf> vb(b.data(), static_cast<Eigen::Index>(b.size()));
    const Word sum = static_cast<Word>(va.cast<double>().dot(vb.cast<double>()));
    ctx.charge_flops(dot_flops(static_cast<std::int64_t>(a.size())));
    return sum;
}

Word inner_product_kernel(CoreContext& ctx, const CyclicStreams& streams, std::int64_t n_hypersteps,
                          SlotId partials) {
    const auto s = static_cast<std::size_t>(ctx.pid());
    auto hv = ctx.open(streams.v.at(s));
    auto hu = ctx.open(streams.u.at(s));

    Word alpha_s = 0;
    for (std::int64_t i = 0; i < n_hypersteps; ++i) {
        const bool preload = i + 1 < n_hypersteps;
        auto tv = ctx.move_down(hv, preload);
        auto tu = ctx.move_down(hu, preload);
        alpha_s += dot_block(ctx, tv, tu);
    }
    ctx.close(hv);
    ctx.close(hu);
    ctx.hyperstep_boundary();

    ctx.slot(partials)[s] = alpha_s;
    ctx.broadcast(partials, std::span<const Word>(&alpha_s, 1), ctx.pid());
    ctx.sync();

    Word alpha = 0;
    for (Word x : ctx.slot(partials)) alpha += x;
    ctx.charge_flops(sum_flops(ctx.nprocs()));
    return alpha;
}

InnerProductRun run_inner_product(const MachineParams& m, std::span<const Word> v, std::span<const Word> u,
                                  std::int64_t token_size) {
    ExternalPool pool(m);
    auto streams = build_cyclic_streams(v, u, m.p, token_size, pool);
    const auto hypersteps = static_cast<std::int64_t>(v.size()) / (m.p * token_size);

    InnerProductRun out;
    out.alpha.assign(static_cast<std::size_t>(m.p), 0);
    out.trace = run_spmd(m, pool, [&](CoreContext& ctx) {
        const auto partials = ctx.register_slot(ctx.nprocs());
        out.alpha[static_cast<std::size_t>(ctx.pid())] = inner_product_kernel(ctx, streams, hypersteps, partials);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Cannon

GridPos grid_position(int core, std::int64_t grid) { return {1 + core / grid, 1 + core % grid}; }

int grid_core(GridPos pos, std::int64_t grid) { return static_cast<int>((pos.row - 1) * grid + (pos.col - 1)); }

std::pair<GridPos, GridPos> cannon_initial_placement(std::int64_t i, std::int64_t j, std::int64_t grid) {
    check_index(i, grid, "row");
    check_index(j, grid, "column");
    return {GridPos{i, 1 + mod(j - i, grid)}, GridPos{1 + mod(i - j, grid), j}};
}

std::int64_t cannon_step_index(std::int64_t s, std::int64_t t, std::int64_t step, std::int64_t grid) {
    check_index(s, grid, "row");
    check_index(t, grid, "column");
    check_index(step, grid, "step");
    return 1 + mod(s + t + step - 3, grid);
}

void gemm_block(CoreContext& ctx, std::span<const Word> a, std::span<const Word> b, std::span<Word> c,
                std::int64_t k) {
    const auto words = static_cast<std::size_t>(k * k);
    if (k < 1 || a.size() != words || b.size() != words || c.size() != words) {
        throw std::invalid_argument("gemm_block expects three " + std::to_string(k) + "x" + std::to_string(k) +
                                    " blocks");
    }
    using Block = Eigen::Matrix<Word, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Block> ma(a.data(), k, k);
    Eigen::Map<const Block> mb(b.data(), k, k);
    Eigen::Map<Block> mc(c.data(), k, k);
    mc.noalias() += ma * mb;
    ctx.charge_flops(gemm_flops(k));
}

void cannon_onchip(CoreContext& ctx, SlotId a_block, SlotId b_block, std::span<Word> c_accumulator,
                   std::int64_t grid, std::int64_t k) {
    const auto pos = grid_position(ctx.pid(), grid);
    const int left = grid_core({pos.row, 1 + mod(pos.col - 2, grid)}, grid);
    const int up = grid_core({1 + mod(pos.row - 2, grid), pos.col}, grid);

    for (std::int64_t step = 0; step < grid; ++step) {
        gemm_block(ctx, ctx.slot(a_block), ctx.slot(b_block), c_accumulator, k);
        ctx.put(left, a_block, ctx.slot(a_block));
        ctx.put(up, b_block, ctx.slot(b_block));
        ctx.sync();
    }
}

CannonPlan make_cannon_plan(std::int64_t n, std::int64_t grid, std::int64_t outer, std::int64_t p) {
    if (n < 1 || grid < 1 || outer < 1) throw std::invalid_argument("n, grid and outer must be positive");
    if (grid * grid != p) {
        throw std::invalid_argument("grid " + std::to_string(grid) + "x" + std::to_string(grid) +
                                    " needs p = " + std::to_string(grid * grid) + " cores, machine has " +
                                    std::to_string(p));
    }
    if (n % (grid * outer) != 0) {
        throw std::invalid_argument("grid * outer = " + std::to_string(grid * outer) + " does not divide n = " +
                                    std::to_string(n));
    }
    return CannonPlan{n, grid, outer, n / (grid * outer)};
}

std::vector<CannonStreams> build_cannon_streams(const BlockMatrixf& a, const BlockMatrixf& b, const CannonPlan& plan,
                                                ExternalPool& pool) {
    if (a.order() != plan.n || b.order() != plan.n) throw std::invalid_argument("matrix order does not match plan");
    const auto N = plan.grid;
    const auto M = plan.outer;
    const auto words = plan.token_words();
    const auto total = M * M * words;

    std::vector<CannonStreams> out;
    std::vector<Word> buf(static_cast<std::size_t>(total));
    using Block = Eigen::Matrix<Word, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    auto store = [&](std::int64_t token, const auto& block) {
        Eigen::Map<Block>(buf.data() + token * words, plan.k, plan.k) = block;
    };

    for (int core = 0; core < static_cast<int>(N * N); ++core) {
        const auto pos = grid_position(core, N);
        // Inner indices held by (s,t) before the first step, 0-based.
        const auto s0 = pos.row - 1;
        const auto t0 = pos.col - 1;
        const auto skew = mod(s0 + t0, N);

        CannonStreams ids;
        for (std::int64_t i = 0; i < M; ++i) {
            for (std::int64_t j = 0; j < M; ++j) store(i * M + j, a.inner_block(i, j, s0, skew, M, N));
        }
        ids.a = pool.create(total, words, buf);
        for (std::int64_t j = 0; j < M; ++j) {
            for (std::int64_t i = 0; i < M; ++i) store(j * M + i, b.inner_block(i, j, skew, t0, M, N));
        }
        ids.b = pool.create(total, words, buf);
        ids.c = pool.create(total, words);
        out.push_back(ids);
    }
    return out;
}

void cannon_multilevel_kernel(CoreContext& ctx, const CannonPlan& plan, const std::vector<CannonStreams>& streams) {
    const auto M = plan.outer;
    const auto words = plan.token_words();
    const auto& mine = streams.at(static_cast<std::size_t>(ctx.pid()));

    const auto a_slot = ctx.register_slot(words);
    const auto b_slot = ctx.register_slot(words);
    const auto c_slot = ctx.register_slot(words);

    auto ha = ctx.open(mine.a);
    auto hb = ctx.open(mine.b);
    auto hc = ctx.open(mine.c);

    for (std::int64_t i = 1; i <= M; ++i) {
        for (std::int64_t j = 1; j <= M; ++j) {
            auto c = ctx.slot(c_slot);
            std::fill(c.begin(), c.end(), Word{0});
            for (std::int64_t step = 1; step <= M; ++step) {
                auto ta = ctx.move_down(ha, true);
                auto tb = ctx.move_down(hb, true);
                std::copy(ta.begin(), ta.end(), ctx.slot(a_slot).begin());
                std::copy(tb.begin(), tb.end(), ctx.slot(b_slot).begin());
                cannon_onchip(ctx, a_slot, b_slot, c, plan.grid, plan.k);
            }
            ctx.move_up(hc, c, false);
            // Re-read row group i for the next column; after the last
            // column the cursor already rests on row group i + 1.
            if (j < M) ctx.seek(ha, -M);
        }
        if (i < M) ctx.seek(hb, -M * M);
    }

    ctx.close(ha);
    ctx.close(hb);
    ctx.close(hc);
}

BlockMatrixf reassemble_cannon(const ExternalPool& pool, const CannonPlan& plan,
                               const std::vector<CannonStreams>& streams) {
    const auto N = plan.grid;
    const auto M = plan.outer;
    using Block = Eigen::Matrix<Word, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    BlockMatrixf c(plan.n);
    for (int core = 0; core < static_cast<int>(N * N); ++core) {
        const auto pos = grid_position(core, N);
        const auto& out = pool.stream(streams.at(static_cast<std::size_t>(core)).c);
        for (std::int64_t i = 0; i < M; ++i) {
            for (std::int64_t j = 0; j < M; ++j) {
                auto tok = out.token(i * M + j);
                c.inner_block(i, j, pos.row - 1, pos.col - 1, M, N) = Eigen::Map<const Block>(tok.data(), plan.k, plan.k);
            }
        }
    }
    return c;
}

CannonRun run_cannon(const MachineParams& m, const BlockMatrixf& a, const BlockMatrixf& b, const CannonPlan& plan) {
    if (plan.grid * plan.grid != m.p) throw std::invalid_argument("plan grid does not match machine core count");
    ExternalPool pool(m);
    auto streams = build_cannon_streams(a, b, plan, pool);
    CannonRun out;
    out.trace = run_spmd(m, pool, [&](CoreContext& ctx) { cannon_multilevel_kernel(ctx, plan, streams); });
    out.c = reassemble_cannon(pool, plan, streams);
    return out;
}

BlockMatrixf reference_multiply(const BlockMatrixf& a, const BlockMatrixf& b) {
    const auto n = a.order();
    BlockMatrixf c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) {
                acc += static_cast<double>(a.dense()(i, k)) * static_cast<double>(b.dense()(k, j));
            }
            c.dense()(i, j) = static_cast<Word>(acc);
        }
    }
    return c;
}

}  // namespace bsps
