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

#include <stdexcept>
#include <string>

namespace bsps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MachineError : public Error {
public:
    using Error::Error;
};

class StreamError : public Error {
public:
    using Error::Error;
};

/// Raised by run_spmd: collective mismatch, budget overflow, bad put, or a
/// kernel error propagated with the core id attached.
class RuntimeError : public Error {
public:
    RuntimeError(int core, const std::string& what)
        : Error(core >= 0 ? "core " + std::to_string(core) + ": " + what : what), core_(core) {}

    /// Core that triggered the error, or -1 when no single core is at fault.
    int core() const noexcept { return core_; }

private:
    int core_;
};

class CostError : public Error {
public:
    using Error::Error;
};

}  // namespace bsps
