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
#include <optional>
#include <string>
#include <vector>

#include "bsps/cost.hpp"
#include "bsps/machine.hpp"

namespace bsps::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kMismatch = 2 };

struct SweepRow {
    std::int64_t n = 0;
    std::int64_t grid = 0;
    std::int64_t outer = 0;
    CannonPrediction prediction;
    std::optional<double> accounted;
};

/// One row per (n, k) with n divisible by grid * k; M = n / (grid k).
/// With execute, each row is also simulated on seeded uniform matrices.
std::vector<SweepRow> sweep_cannon(const MachineParams& m, std::int64_t grid, const std::vector<std::int64_t>& ns,
                                   const std::vector<std::int64_t>& ks, bool execute, std::uint64_t seed);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bsps::cli
