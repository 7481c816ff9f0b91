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
#include <string>
#include <string_view>

#include "bsps/error.hpp"

namespace bsps {

/// Data word of the accelerator: one single-precision float.
using Word = float;

/// Parameter pack of a BSP accelerator.
///
/// Rates and latencies are in FLOP units (g and e per word); L and E are
/// counted in words. word_bytes is only used when converting to bytes.
struct MachineParams {
    std::int64_t p = 1;
    double r = 1.0;
    double g = 0.0;
    double l = 0.0;
    double e = 0.0;
    std::int64_t L = 1;
    std::int64_t E = 1;
    std::int64_t word_bytes = 4;

    bool operator==(const MachineParams&) const = default;
};

/// Throws MachineError naming the first violated invariant.
void validate(const MachineParams& m);

/// Known presets: "epiphany3", "uniform_unit".
MachineParams machine_from_preset(std::string_view name);

/// Parses `key = value` entries separated by newlines or whitespace.
/// Lines starting with '#' are comments. word_bytes is optional.
MachineParams machine_from_config(std::string_view text);

/// Reads a config file from disk.
MachineParams machine_from_file(const std::string& path);

/// Resolves a preset name first, then falls back to a config path.
MachineParams resolve_machine(const std::string& preset_or_path);

/// Serializes to the config format; round-trips exactly through
/// machine_from_config.
std::string to_config(const MachineParams& m);

inline double flops_to_seconds(const MachineParams& m, double cost) { return cost / m.r; }

/// External-memory bandwidth implied by e, in MB/s (10^6 bytes).
inline double external_bandwidth_mbs(const MachineParams& m) {
    return m.r / m.e * static_cast<double>(m.word_bytes) / 1e6;
}

}  // namespace bsps
