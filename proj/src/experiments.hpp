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

#include <string>
#include <vector>

#include "config.hpp"

namespace spde {

struct ExperimentOutput {
  std::string summary_json;        // also written to <out_dir>/summary.json
  std::vector<std::string> files;  // artifact paths relative to out_dir
};

/// Runs the configured experiment and writes its artifacts (ensemble CSVs,
/// summary.json, plot_data.csv, optional per-path CSVs) under
/// config.out_dir. Ensemble CSV bytes are identical for any thread count.
ExperimentOutput run_experiment(const RunConfig& config);

/// Reshapes a summary document into long-form CSV
/// (series,replication,functional,x,y) for plotting tools. Throws
/// ConfigError when the text is not a summary produced by run_experiment.
std::string emit_plot_data(const std::string& summary_json);

}  // namespace spde
