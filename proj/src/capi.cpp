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

#include "spdelab.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "experiments.hpp"

namespace {

thread_local std::string g_last_error;

spde_status translate_current_exception() noexcept {
  try {
    throw;
  } catch (const spde::ConfigError& e) {
    g_last_error = e.what();
    return SPDE_ERROR_CONFIG;
  } catch (const spde::IoError& e) {
    g_last_error = e.what();
    return SPDE_ERROR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SPDE_ERROR_COMPUTE;
  } catch (const std::exception& e) {
    // ComputeError and anything unforeseen count as computation failures.
    g_last_error = e.what();
    return SPDE_ERROR_COMPUTE;
  } catch (...) {
    g_last_error = "unknown error";
    return SPDE_ERROR_COMPUTE;
  }
}

}  // namespace

struct spde_run {
  spde::RunConfig config;
  std::string config_json;
  std::string summary;
  bool executed = false;
};

extern "C" {

const char* spde_version(void) { return "1.0.0"; }

const char* spde_last_error(void) { return g_last_error.c_str(); }

spde_status spde_run_create(const char* config_json, spde_run** out_run) {
  if (out_run == nullptr) {
    g_last_error = "out_run is NULL";
    return SPDE_ERROR_CONFIG;
  }
  *out_run = nullptr;
  if (config_json == nullptr) {
    g_last_error = "config_json is NULL";
    return SPDE_ERROR_CONFIG;
  }
  try {
    auto run = new spde_run;
    run->config = spde::parse_config(config_json);
    run->config_json = spde::serialize_config(run->config);
    *out_run = run;
    return SPDE_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

spde_status spde_run_execute(spde_run* run) {
  if (run == nullptr) {
    g_last_error = "run is NULL";
    return SPDE_ERROR_CONFIG;
  }
  try {
    spde::ExperimentOutput out = spde::run_experiment(run->config);
    run->summary = std::move(out.summary_json);
    run->executed = true;
    return SPDE_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

const char* spde_run_summary_json(const spde_run* run) {
  if (run == nullptr || !run->executed) {
    g_last_error = "run has not been executed";
    return nullptr;
  }
  return run->summary.c_str();
}

const char* spde_run_config_json(const spde_run* run) {
  if (run == nullptr) {
    g_last_error = "run is NULL";
    return nullptr;
  }
  return run->config_json.c_str();
}

void spde_run_destroy(spde_run* run) { delete run; }

spde_status spde_plot_data_from_summary(const char* summary_json,
                                        char** out_csv) {
  if (out_csv == nullptr) {
    g_last_error = "out_csv is NULL";
    return SPDE_ERROR_CONFIG;
  }
  *out_csv = nullptr;
  if (summary_json == nullptr) {
    g_last_error = "summary_json is NULL";
    return SPDE_ERROR_CONFIG;
  }
  try {
    const std::string csv = spde::emit_plot_data(summary_json);
    char* buf = static_cast<char*>(std::malloc(csv.size() + 1));
    if (buf == nullptr) {
      g_last_error = "out of memory";
      return SPDE_ERROR_COMPUTE;
    }
    std::memcpy(buf, csv.data(), csv.size() + 1);
    *out_csv = buf;
    return SPDE_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

void spde_string_free(char* s) { std::free(s); }

}  // extern "C"
