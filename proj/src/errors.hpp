// Copyright 2026 The spde-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spde {

/// Invalid configuration: bad grid dimensions, unknown preset, malformed
/// config document, out-of-range parameters. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation failed in a way that invalidates the run: path blow-up
/// beyond the tolerated fraction, degenerate weights, empty restriction.
/// Maps to exit code 3.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failures while emitting artifacts. Maps to exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A single path left the admissible range (non-finite state or clamp
/// exceeded). Carries the lattice location of the first offending value.
class PathBlowUpError : public ComputeError {
 public:
  PathBlowUpError(std::size_t time_index, std::size_t cell_index)
      : ComputeError("path blow-up at time step " + std::to_string(time_index) +
                     ", cell " + std::to_string(cell_index)),
        time_index(time_index),
        cell_index(cell_index) {}

  std::size_t time_index;
  std::size_t cell_index;
};

/// The running log-weight became non-finite. Carries the time index.
class WeightOverflowError : public ComputeError {
 public:
  explicit WeightOverflowError(std::size_t time_index)
      : ComputeError("non-finite log-weight at time step " +
                     std::to_string(time_index)),
        time_index(time_index) {}

  std::size_t time_index;
};

}  // namespace spde
