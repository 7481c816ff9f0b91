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

#include "bsps/machine.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace bsps {

namespace {

constexpr std::array<std::string_view, 7> kRequiredKeys = {"p", "r", "g", "l", "e", "L", "E"};

bool is_known_key(std::string_view key) {
    for (auto k : kRequiredKeys) {
        if (k == key) return true;
    }
    return key == "word_bytes";
}

double parse_number(std::string_view key, std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw MachineError("non-numeric value for " + std::string(key) + ": '" + std::string(text) + "'");
    }
    return value;
}

std::int64_t as_count(std::string_view key, double value) {
    if (!std::isfinite(value) || std::floor(value) != value || std::fabs(value) > 9.0e15) {
        throw MachineError(std::string(key) + " must be an integer");
    }
    return static_cast<std::int64_t>(value);
}

// Splits a document into key/value pairs, tolerating blanks around '='.
std::vector<std::pair<std::string, std::string>> tokenize(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream lines{std::string(text)};
    std::string line;
    while (std::getline(lines, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        std::string packed;
        packed.reserve(line.size());
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (c == '\r') c = ' ';
            if (c == '=') {
                while (!packed.empty() && (packed.back() == ' ' || packed.back() == '\t')) packed.pop_back();
                packed.push_back('=');
                while (i + 1 < line.size() && (line[i + 1] == ' ' || line[i + 1] == '\t')) ++i;
                continue;
            }
            packed.push_back(c == '\t' ? ' ' : c);
        }

        std::istringstream words(packed);
        std::string word;
        while (words >> word) {
            auto eq = word.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw MachineError("malformed entry '" + word + "', expected key = value");
            }
            out.emplace_back(word.substr(0, eq), word.substr(eq + 1));
        }
    }
    return out;
}

}  // namespace

void validate(const MachineParams& m) {
    if (m.p < 1) throw MachineError("p must be >= 1");
    if (!std::isfinite(m.r) || m.r <= 0.0) throw MachineError("r must be finite and > 0");
    if (!std::isfinite(m.g) || m.g < 0.0) throw MachineError("g must be finite and >= 0");
    if (!std::isfinite(m.l) || m.l < 0.0) throw MachineError("l must be finite and >= 0");
    if (!std::isfinite(m.e) || m.e < 0.0) throw MachineError("e must be finite and >= 0");
    if (m.L < 1) throw MachineError("L must be >= 1");
    if (m.E < m.L) throw MachineError("E must be >= L");
    if (m.word_bytes < 1) throw MachineError("word_bytes must be >= 1");
}

MachineParams machine_from_preset(std::string_view name) {
    if (name == "epiphany3") {
        // 16 cores at 600 MHz, one FLOP per 5 cycles, 32 kB SRAM per core,
        // 32 MB shared DRAM segment.
        return MachineParams{.p = 16,
                             .r = 120e6,
                             .g = 5.59,
                             .l = 136.0,
                             .e = 43.4,
                             .L = 8192,
                             .E = 8388608,
                             .word_bytes = 4};
    }
    if (name == "uniform_unit") {
        return MachineParams{.p = 4, .r = 1.0, .g = 1.0, .l = 0.0, .e = 1.0, .L = 1024, .E = 65536, .word_bytes = 4};
    }
    throw MachineError("unknown machine preset '" + std::string(name) + "'");
}

MachineParams machine_from_config(std::string_view text) {
    std::map<std::string, double> values;
    for (auto& [key, value] : tokenize(text)) {
        if (!is_known_key(key)) throw MachineError("unknown parameter " + key);
        if (values.count(key)) throw MachineError("duplicate parameter " + key);
        values[key] = parse_number(key, value);
    }
    for (auto key : kRequiredKeys) {
        if (!values.count(std::string(key))) throw MachineError("missing parameter " + std::string(key));
    }

    MachineParams m;
    m.p = as_count("p", values["p"]);
    m.r = values["r"];
    m.g = values["g"];
    m.l = values["l"];
    m.e = values["e"];
    m.L = as_count("L", values["L"]);
    m.E = as_count("E", values["E"]);
    if (auto it = values.find("word_bytes"); it != values.end()) m.word_bytes = as_count("word_bytes", it->second);
    validate(m);
    return m;
}

MachineParams machine_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MachineError("cannot read machine config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return machine_from_config(buf.str());
}

MachineParams resolve_machine(const std::string& preset_or_path) {
    if (preset_or_path == "epiphany3" || preset_or_path == "uniform_unit") return machine_from_preset(preset_or_path);
    return machine_from_file(preset_or_path);
}

std::string to_config(const MachineParams& m) {
    char buf[64];
    std::string out;
    auto real = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out += buf;
    };
    auto count = [&](const char* key, std::int64_t v) {
        out += key;
        out += " = " + std::to_string(v) + "\n";
    };
    count("p", m.p);
    real("r", m.r);
    real("g", m.g);
    real("l", m.l);
    real("e", m.e);
    count("L", m.L);
    count("E", m.E);
    count("word_bytes", m.word_bytes);
    return out;
}

}  // namespace bsps
