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

#include "config.hpp"

#include <cmath>
#include <initializer_list>
#include <string>

#include "errors.hpp"
#include "json.hpp"

namespace spde {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) {
  throw ConfigError("config: " + message);
}

std::string path_of(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

void check_keys(const json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      fail("unknown key '" + path_of(scope, item.key()) + "'");
    }
  }
}

double get_double(const json& obj, const std::string& scope,
                  const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    fail("key '" + path_of(scope, key) + "' must be a number");
  }
  return v.get<double>();
}

double get_finite(const json& obj, const std::string& scope,
                  const std::string& key, double fallback) {
  const double v = get_double(obj, scope, key, fallback);
  if (!std::isfinite(v)) {
    fail("key '" + path_of(scope, key) + "' must be finite");
  }
  return v;
}

std::size_t get_count(const json& obj, const std::string& scope,
                      const std::string& key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    fail("key '" + path_of(scope, key) + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

bool get_bool(const json& obj, const std::string& scope,
              const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    fail("key '" + path_of(scope, key) + "' must be a boolean");
  }
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& scope,
                       const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    fail("key '" + path_of(scope, key) + "' must be a string");
  }
  return v.get<std::string>();
}

const json& require_object(const json& obj, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_object()) {
    fail("key '" + key + "' must be an object");
  }
  return v;
}

FunctionalSpec parse_functional(const json& item, std::size_t index) {
  const std::string scope = "functionals[" + std::to_string(index) + "]";
  if (!item.is_object()) {
    fail("'" + scope + "' must be an object");
  }
  check_keys(item, scope, {"kind", "x0"});
  const std::string kind = get_string(item, scope, "kind", "");
  FunctionalSpec spec;
  if (kind == "point_value") {
    spec.kind = FunctionalSpec::Kind::kPointValue;
    if (!item.contains("x0")) {
      fail("key '" + scope + ".x0' is required for point_value");
    }
    spec.x0 = get_finite(item, scope, "x0", 0.0);
  } else {
    if (item.contains("x0")) {
      fail("key '" + scope + ".x0' only applies to point_value");
    }
    if (kind == "spatial_mean") {
      spec.kind = FunctionalSpec::Kind::kSpatialMean;
    } else if (kind == "spatial_max") {
      spec.kind = FunctionalSpec::Kind::kSpatialMax;
    } else if (kind == "l2_norm") {
      spec.kind = FunctionalSpec::Kind::kL2Norm;
    } else {
      fail("key '" + scope +
           ".kind' must be one of point_value, spatial_mean, spatial_max, "
           "l2_norm");
    }
  }
  return spec;
}

void parse_coefficients(const json& root, RunConfig& config) {
  if (!root.contains("coefficients")) return;
  const json& co = require_object(root, "coefficients");
  CoefficientConfig& cc = config.coefficients;
  cc.preset = get_string(co, "coefficients", "preset", cc.preset);
  if (cc.preset == "allen_cahn") {
    check_keys(co, "coefficients",
               {"preset", "C", "gamma", "h", "allow_low_gamma"});
    cc.C = get_finite(co, "coefficients", "C", cc.C);
    cc.gamma = get_finite(co, "coefficients", "gamma", cc.gamma);
    cc.h = get_finite(co, "coefficients", "h", cc.h);
    cc.allow_low_gamma =
        get_bool(co, "coefficients", "allow_low_gamma", cc.allow_low_gamma);
  } else if (cc.preset == "constant") {
    check_keys(co, "coefficients", {"preset", "a", "b", "d", "h"});
    cc.a = get_finite(co, "coefficients", "a", cc.a);
    cc.b = get_finite(co, "coefficients", "b", cc.b);
    cc.d = get_finite(co, "coefficients", "d", cc.d);
    cc.h = get_finite(co, "coefficients", "h", 0.0);
  } else if (cc.preset == "zero_drift") {
    check_keys(co, "coefficients", {"preset", "h"});
    cc.h = get_finite(co, "coefficients", "h", 0.0);
  } else if (cc.preset == "linear_diffusion") {
    check_keys(co, "coefficients", {"preset", "C", "slope_d", "h"});
    cc.C = get_finite(co, "coefficients", "C", cc.C);
    cc.slope_d = get_finite(co, "coefficients", "slope_d", cc.slope_d);
    cc.h = get_finite(co, "coefficients", "h", 1.0);
  } else {
    fail("key 'coefficients.preset' must be one of allen_cahn, constant, "
         "zero_drift, linear_diffusion");
  }
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kNoiseSelfTest:
      return "noise-selftest";
    case ExperimentKind::kResidualCheck:
      return "residual-check";
    case ExperimentKind::kSdeOracle:
      return "sde-oracle";
    case ExperimentKind::kSimulate:
      return "simulate";
    case ExperimentKind::kCompareLaws:
      return "compare-laws";
  }
  return "simulate";
}

ExperimentKind experiment_from_name(const std::string& name) {
  if (name == "noise-selftest") return ExperimentKind::kNoiseSelfTest;
  if (name == "residual-check") return ExperimentKind::kResidualCheck;
  if (name == "sde-oracle") return ExperimentKind::kSdeOracle;
  if (name == "simulate") return ExperimentKind::kSimulate;
  if (name == "compare-laws") return ExperimentKind::kCompareLaws;
  fail("key 'experiment' must be one of noise-selftest, residual-check, "
       "sde-oracle, simulate, compare-laws (got '" +
       name + "')");
}

std::vector<FunctionalSpec> default_functionals(double length) {
  return {
      FunctionalSpec{FunctionalSpec::Kind::kPointValue, length / 2.0},
      FunctionalSpec{FunctionalSpec::Kind::kSpatialMean, 0.0},
      FunctionalSpec{FunctionalSpec::Kind::kSpatialMax, 0.0},
      FunctionalSpec{FunctionalSpec::Kind::kL2Norm, 0.0},
  };
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!root.is_object()) {
    fail("top level must be a JSON object");
  }
  check_keys(root, "",
             {"experiment", "grid", "boundary", "coefficients", "paths",
              "master_seed", "levels", "functionals", "bootstrap_resamples",
              "seed_replications", "threads", "out_dir", "export_paths",
              "clamp_bound", "sde_mu"});

  RunConfig config;
  if (root.contains("experiment")) {
    config.experiment =
        experiment_from_name(get_string(root, "", "experiment", ""));
  }

  if (root.contains("grid")) {
    const json& grid = require_object(root, "grid");
    check_keys(grid, "grid",
               {"final_time", "length", "time_steps", "space_cells"});
    config.final_time =
        get_finite(grid, "grid", "final_time", config.final_time);
    config.length = get_finite(grid, "grid", "length", config.length);
    config.time_steps =
        get_count(grid, "grid", "time_steps", config.time_steps);
    config.space_cells =
        get_count(grid, "grid", "space_cells", config.space_cells);
  }

  const std::string boundary = get_string(root, "", "boundary", "neumann");
  if (boundary == "neumann") {
    config.boundary = BoundaryKind::kNeumann;
  } else if (boundary == "dirichlet") {
    config.boundary = BoundaryKind::kDirichlet;
  } else {
    fail("key 'boundary' must be 'neumann' or 'dirichlet'");
  }

  parse_coefficients(root, config);

  config.paths = get_count(root, "", "paths", config.paths);
  if (config.paths < 2) {
    fail("key 'paths' must be at least 2");
  }
  config.master_seed = get_count(root, "", "master_seed", config.master_seed);

  if (root.contains("levels")) {
    const json& levels = root.at("levels");
    if (!levels.is_array() || levels.empty()) {
      fail("key 'levels' must be a non-empty array of numbers");
    }
    config.levels.clear();
    double prev = 0.0;
    for (const json& v : levels) {
      if (!v.is_number()) {
        fail("key 'levels' must contain only numbers");
      }
      const double lvl = v.get<double>();
      if (!std::isfinite(lvl) || lvl <= prev) {
        fail("key 'levels' must be finite, positive, and strictly "
             "increasing");
      }
      config.levels.push_back(lvl);
      prev = lvl;
    }
  }

  if (root.contains("functionals")) {
    const json& funcs = root.at("functionals");
    if (!funcs.is_array()) {
      fail("key 'functionals' must be an array");
    }
    config.functionals.clear();
    for (std::size_t i = 0; i < funcs.size(); ++i) {
      config.functionals.push_back(parse_functional(funcs.at(i), i));
    }
  } else {
    config.functionals = default_functionals(config.length);
  }
  for (const FunctionalSpec& f : config.functionals) {
    if (f.kind == FunctionalSpec::Kind::kPointValue &&
        (f.x0 < 0.0 || f.x0 > config.length)) {
      fail("point_value location x0 must lie in [0, L]");
    }
  }

  config.bootstrap_resamples =
      get_count(root, "", "bootstrap_resamples", config.bootstrap_resamples);
  if (config.bootstrap_resamples < 2) {
    fail("key 'bootstrap_resamples' must be at least 2");
  }
  config.seed_replications =
      get_count(root, "", "seed_replications", config.seed_replications);
  if (config.seed_replications < 1) {
    fail("key 'seed_replications' must be at least 1");
  }
  {
    const std::size_t threads = get_count(root, "", "threads", 0);
    if (root.contains("threads")) {
      if (threads > 4096) fail("key 'threads' is implausibly large");
      config.threads = static_cast<int>(threads);
    }
  }
  config.out_dir = get_string(root, "", "out_dir", config.out_dir);
  if (config.out_dir.empty()) {
    fail("key 'out_dir' must be a non-empty path");
  }
  config.export_paths =
      get_bool(root, "", "export_paths", config.export_paths);

  if (root.contains("clamp_bound") && !root.at("clamp_bound").is_null()) {
    const double clamp = get_finite(root, "", "clamp_bound", 0.0);
    if (clamp <= 0.0) {
      fail("key 'clamp_bound' must be positive");
    }
    if (std::abs(config.coefficients.h) >= clamp) {
      fail("key 'clamp_bound' must exceed the initial profile magnitude");
    }
    config.clamp_bound = clamp;
  }

  config.sde_mu = get_finite(root, "", "sde_mu", config.sde_mu);

  // Constraint checks that live with the domain constructors; running them
  // here means a config that parses is a config that runs.
  make_grid(config);
  make_coefficients(config);
  return config;
}

std::string serialize_config(const RunConfig& config) {
  ordered_json j;
  j["experiment"] = experiment_name(config.experiment);
  j["grid"] = {
      {"final_time", config.final_time},
      {"length", config.length},
      {"time_steps", config.time_steps},
      {"space_cells", config.space_cells},
  };
  j["boundary"] =
      config.boundary == BoundaryKind::kNeumann ? "neumann" : "dirichlet";

  ordered_json co;
  const CoefficientConfig& cc = config.coefficients;
  co["preset"] = cc.preset;
  if (cc.preset == "allen_cahn") {
    co["C"] = cc.C;
    co["gamma"] = cc.gamma;
    co["h"] = cc.h;
    co["allow_low_gamma"] = cc.allow_low_gamma;
  } else if (cc.preset == "constant") {
    co["a"] = cc.a;
    co["b"] = cc.b;
    co["d"] = cc.d;
    co["h"] = cc.h;
  } else if (cc.preset == "zero_drift") {
    co["h"] = cc.h;
  } else if (cc.preset == "linear_diffusion") {
    co["C"] = cc.C;
    co["slope_d"] = cc.slope_d;
    co["h"] = cc.h;
  }
  j["coefficients"] = co;

  j["paths"] = config.paths;
  j["master_seed"] = config.master_seed;
  j["levels"] = config.levels;
  ordered_json funcs = ordered_json::array();
  for (const FunctionalSpec& f : config.functionals) {
    ordered_json item;
    switch (f.kind) {
      case FunctionalSpec::Kind::kPointValue:
        item["kind"] = "point_value";
        item["x0"] = f.x0;
        break;
      case FunctionalSpec::Kind::kSpatialMean:
        item["kind"] = "spatial_mean";
        break;
      case FunctionalSpec::Kind::kSpatialMax:
        item["kind"] = "spatial_max";
        break;
      case FunctionalSpec::Kind::kL2Norm:
        item["kind"] = "l2_norm";
        break;
    }
    funcs.push_back(item);
  }
  j["functionals"] = funcs;
  j["bootstrap_resamples"] = config.bootstrap_resamples;
  j["seed_replications"] = config.seed_replications;
  j["threads"] = config.threads;
  j["out_dir"] = config.out_dir;
  j["export_paths"] = config.export_paths;
  j["clamp_bound"] =
      config.clamp_bound ? ordered_json(*config.clamp_bound)
                         : ordered_json(nullptr);
  j["sde_mu"] = config.sde_mu;
  return j.dump(2);
}

Grid make_grid(const RunConfig& config) {
  return Grid(config.final_time, config.length, config.time_steps,
              config.space_cells);
}

CoefficientSet make_coefficients(const RunConfig& config) {
  const CoefficientConfig& cc = config.coefficients;
  if (cc.preset == "allen_cahn") {
    AllenCahnParams params;
    params.C = cc.C;
    params.gamma = cc.gamma;
    params.allow_gamma_outside_theorem = cc.allow_low_gamma;
    return allen_cahn_preset(params, cc.h);
  }
  if (cc.preset == "constant") {
    return constant_preset(cc.a, cc.b, cc.d, cc.h);
  }
  if (cc.preset == "zero_drift") {
    return zero_drift_preset(cc.h);
  }
  if (cc.preset == "linear_diffusion") {
    return linear_diffusion_preset(cc.C, cc.slope_d, cc.h);
  }
  fail("unknown coefficient preset '" + cc.preset + "'");
}

SchemeConfig make_scheme(const RunConfig& config) {
  SchemeConfig scheme;
  scheme.clamp_bound = config.clamp_bound;
  return scheme;
}

EnsembleConfig make_ensemble_config(const RunConfig& config,
                                    std::uint64_t arm_seed) {
  EnsembleConfig ensemble{
      .grid = make_grid(config),
      .boundary = config.boundary,
      .scheme = make_scheme(config),
      .functionals = config.functionals,
      .levels = config.levels,
      .paths = config.paths,
      .master_seed = arm_seed,
      .threads = config.threads,
  };
  return ensemble;
}

}  // namespace spde
