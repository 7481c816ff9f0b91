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
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bsps/machine.hpp"

namespace bsps {

/// One superstep: per-core work (FLOP), words sent and received.
/// Supersteps cut short by a hyperstep boundary or by kernel exit are not
/// closed by a barrier and carry no latency term.
struct SuperstepRecord {
    std::vector<double> work;
    std::vector<std::int64_t> sent;
    std::vector<std::int64_t> received;
    std::int64_t h = 0;
    bool synchronized = true;

    bool operator==(const SuperstepRecord&) const = default;
};

struct HyperstepRecord {
    std::vector<SuperstepRecord> supersteps;
    /// Words moved down by each core for this hyperstep's tokens.
    std::vector<std::int64_t> fetch;

    bool operator==(const HyperstepRecord&) const = default;
};

struct Trace {
    MachineParams machine;
    std::vector<HyperstepRecord> hypersteps;

    bool operator==(const Trace&) const = default;
};

enum class Classification { ComputeHeavy, BandwidthHeavy, NoFetch };

std::string_view to_string(Classification c);

// Work charged by the example kernels. Predictors and kernels both call
// these so accounted and predicted costs are built from identical terms.
inline double dot_flops(std::int64_t length) { return 2.0 * static_cast<double>(length); }
inline double gemm_flops(std::int64_t k) {
    const auto kd = static_cast<double>(k);
    return 2.0 * kd * kd * kd;
}
inline double sum_flops(std::int64_t terms) { return static_cast<double>(terms); }

/// max_s max(t_s, r_s). Throws CostError on length mismatch.
std::int64_t h_relation(std::span<const std::int64_t> sent, std::span<const std::int64_t> received);

/// max w + g h + l, the l term only for barrier-closed supersteps.
double superstep_term(double max_work, double h, bool synchronized, const MachineParams& m);
/// max(T_h, e V).
double hyperstep_term(double bsp_cost, double fetch_words, const MachineParams& m);

double superstep_cost(const SuperstepRecord& rec, const MachineParams& m);
/// T_h: sum of the contained superstep costs.
double hyperstep_bsp_cost(const HyperstepRecord& rec, const MachineParams& m);
std::int64_t max_fetch(const HyperstepRecord& rec);
double hyperstep_cost(const HyperstepRecord& rec, const MachineParams& m);

/// Compute-heavy at equality; no-fetch when nothing was moved down.
Classification classify(double bsp_cost, double fetch_cost, bool has_fetch);
Classification classify(const HyperstepRecord& rec, const MachineParams& m);

/// Sum over hypersteps of max(T_h, e max_s V_h(s)), using trace.machine.
double bsps_cost(const Trace& trace);
/// Same, re-evaluated under different parameters.
double bsps_cost(const Trace& trace, const MachineParams& m);

/// Cyclic inner product: n hypersteps of 2C work and 2C fetched words, then
/// an all-to-all of partial sums and a local sum of p terms.
double predict_inner_product(std::int64_t vec_len, std::int64_t token_size, const MachineParams& m);

struct CannonPrediction {
    std::int64_t k = 0;
    std::int64_t hypersteps = 0;
    double bsp_cost = 0.0;    ///< T_h = N (2k^3 + 2k^2 g + l)
    double fetch_cost = 0.0;  ///< 2 k^2 e
    Classification classification = Classification::ComputeHeavy;
    double total = 0.0;
};

/// Multi-level Cannon, M^3 hypersteps each running N on-chip supersteps.
CannonPrediction predict_cannon_detail(std::int64_t n, std::int64_t grid, std::int64_t outer, const MachineParams& m);
double predict_cannon(std::int64_t n, std::int64_t grid, std::int64_t outer, const MachineParams& m);

/// Per-hyperstep Cannon terms for inner block order k (real-valued).
double cannon_hyperstep_bsp_cost(double k, std::int64_t grid, const MachineParams& m);
double cannon_hyperstep_fetch_cost(double k, const MachineParams& m);

/// Positive real k with N(2k^3 + 2k^2 g + l) = 2k^2 e, ascending.
std::vector<double> solve_k_equal(const MachineParams& m, std::int64_t grid);

/// One row per hyperstep; full double precision; leading version comment.
void write_trace_csv(std::ostream& out, const Trace& trace);

}  // namespace bsps
