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

#include "bsps/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace bsps {

std::string_view to_string(Classification c) {
    switch (c) {
        case Classification::ComputeHeavy:
            return "compute-heavy";
        case Classification::BandwidthHeavy:
            return "bandwidth-heavy";
        case Classification::NoFetch:
            return "no-fetch";
    }
    return "unknown";
}

std::int64_t h_relation(std::span<const std::int64_t> sent, std::span<const std::int64_t> received) {
    if (sent.size() != received.size()) throw CostError("sent/received length mismatch");
    std::int64_t h = 0;
    for (std::size_t s = 0; s < sent.size(); ++s) h = std::max({h, sent[s], received[s]});
    return h;
}

double superstep_term(double max_work, double h, bool synchronized, const MachineParams& m) {
    const double t = max_work + m.g * h;
    return synchronized ? t + m.l : t;
}

double hyperstep_term(double bsp_cost, double fetch_words, const MachineParams& m) {
    return std::max(bsp_cost, m.e * fetch_words);
}

double superstep_cost(const SuperstepRecord& rec, const MachineParams& m) {
    double max_work = 0.0;
    for (double w : rec.work) max_work = std::max(max_work, w);
    return superstep_term(max_work, static_cast<double>(rec.h), rec.synchronized, m);
}

double hyperstep_bsp_cost(const HyperstepRecord& rec, const MachineParams& m) {
    double total = 0.0;
    for (const auto& ss : rec.supersteps) total += superstep_cost(ss, m);
    return total;
}

std::int64_t max_fetch(const HyperstepRecord& rec) {
    std::int64_t v = 0;
    for (auto f : rec.fetch) v = std::max(v, f);
    return v;
}

double hyperstep_cost(const HyperstepRecord& rec, const MachineParams& m) {
    return hyperstep_term(hyperstep_bsp_cost(rec, m), static_cast<double>(max_fetch(rec)), m);
}

Classification classify(double bsp_cost, double fetch_cost, bool has_fetch) {
    if (!has_fetch) return Classification::NoFetch;
    return fetch_cost > bsp_cost ? Classification::BandwidthHeavy : Classification::ComputeHeavy;
}

Classification classify(const HyperstepRecord& rec, const MachineParams& m) {
    const auto v = max_fetch(rec);
    return classify(hyperstep_bsp_cost(rec, m), m.e * static_cast<double>(v), v > 0);
}

double bsps_cost(const Trace& trace) { return bsps_cost(trace, trace.machine); }

double bsps_cost(const Trace& trace, const MachineParams& m) {
    double total = 0.0;
    for (const auto& h : trace.hypersteps) total += hyperstep_cost(h, m);
    return total;
}

double predict_inner_product(std::int64_t vec_len, std::int64_t token_size, const MachineParams& m) {
    if (token_size < 1 || vec_len < 1) throw CostError("vector length and token size must be positive");
    if (vec_len % (m.p * token_size) != 0) {
        throw CostError("p * C = " + std::to_string(m.p * token_size) + " does not divide vector length " +
                        std::to_string(vec_len));
    }
    const auto hypersteps = vec_len / (m.p * token_size);
    const double fetched = static_cast<double>(2 * token_size);

    double total = 0.0;
    for (std::int64_t i = 0; i < hypersteps; ++i) {
        const double t_h = 0.0 + superstep_term(dot_flops(token_size), 0.0, false, m);
        total += hyperstep_term(t_h, fetched, m);
    }
    // Partial sums: one all-to-all superstep, then a local sum of p terms.
    double tail = 0.0;
    tail += superstep_term(0.0, static_cast<double>(m.p - 1), true, m);
    tail += superstep_term(sum_flops(m.p), 0.0, false, m);
    total += hyperstep_term(tail, 0.0, m);
    return total;
}

double cannon_hyperstep_bsp_cost(double k, std::int64_t grid, const MachineParams& m) {
    return static_cast<double>(grid) * (2.0 * k * k * k + 2.0 * k * k * m.g + m.l);
}

double cannon_hyperstep_fetch_cost(double k, const MachineParams& m) { return 2.0 * k * k * m.e; }

CannonPrediction predict_cannon_detail(std::int64_t n, std::int64_t grid, std::int64_t outer, const MachineParams& m) {
    if (n < 1 || grid < 1 || outer < 1) throw CostError("n, N and M must be positive");
    if (grid * grid != m.p) {
        throw CostError("grid " + std::to_string(grid) + "x" + std::to_string(grid) + " does not match p = " +
                        std::to_string(m.p));
    }
    if (n % (grid * outer) != 0) {
        throw CostError("N * M = " + std::to_string(grid * outer) + " does not divide n = " + std::to_string(n));
    }
    CannonPrediction out;
    out.k = n / (grid * outer);
    out.hypersteps = outer * outer * outer;

    const double words = static_cast<double>(out.k * out.k);
    double t_h = 0.0;
    for (std::int64_t step = 0; step < grid; ++step) t_h += superstep_term(gemm_flops(out.k), 2.0 * words, true, m);
    out.bsp_cost = t_h;
    out.fetch_cost = m.e * (2.0 * words);
    out.classification = classify(out.bsp_cost, out.fetch_cost, true);

    double total = 0.0;
    for (std::int64_t h = 0; h < out.hypersteps; ++h) total += hyperstep_term(t_h, 2.0 * words, m);
    out.total = total;
    return out;
}

double predict_cannon(std::int64_t n, std::int64_t grid, std::int64_t outer, const MachineParams& m) {
    return predict_cannon_detail(n, grid, outer, m).total;
}

namespace {

double bisect(const auto& f, double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= 1e-9 * std::max(std::fabs(mid), 1e-300) || mid == lo || mid == hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> solve_k_equal(const MachineParams& m, std::int64_t grid) {
    if (grid < 1) throw CostError("grid side must be positive");
    const double nd = static_cast<double>(grid);
    // f(k) = 2N k^3 + (2Ng - 2e) k^2 + Nl: positive where compute dominates.
    auto f = [&](double k) { return cannon_hyperstep_bsp_cost(k, grid, m) - cannon_hyperstep_fetch_cost(k, m); };

    std::vector<double> roots;
    // f'(k) = k (6N k + 4Ng - 4e): f decreases on (0, kc) and increases after.
    const double kc = (4.0 * m.e - 4.0 * nd * m.g) / (6.0 * nd);
    if (!(kc > 0.0)) return roots;  // f increasing on k > 0 from f(0) = Nl >= 0
    const double fc = f(kc);
    if (fc > 0.0) return roots;
    if (fc == 0.0) return {kc};

    if (f(0.0) > 0.0) roots.push_back(bisect(f, 0.0, kc));
    double hi = 2.0 * kc;
    while (f(hi) <= 0.0) hi *= 2.0;
    roots.push_back(bisect(f, kc, hi));
    return roots;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
    const auto& m = trace.machine;
    out << "# bsps-trace v1\n";
    out << "hyperstep,supersteps,T_h,max_fetch,e_V,cost,classification\n";
    char buf[256];
    for (std::size_t h = 0; h < trace.hypersteps.size(); ++h) {
        const auto& rec = trace.hypersteps[h];
        const auto v = max_fetch(rec);
        const double t_h = hyperstep_bsp_cost(rec, m);
        const double ev = m.e * static_cast<double>(v);
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%lld,%.17g,%.17g,", h, rec.supersteps.size(), t_h,
                      static_cast<long long>(v), ev, hyperstep_cost(rec, m));
        out << buf << to_string(classify(rec, m)) << '\n';
    }
}

}  // namespace bsps
