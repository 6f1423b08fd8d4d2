#pragma once

// Batch experiment runner: plain-text config parsing, preset experiments,
// seeded reproducibility and artifact emission (report.json, data.csv,
// manifest.json under a content-hash subdirectory per run).

#include "nikodym/common.hpp"

#include <map>

namespace nikodym {

struct RunConfig {
  std::string experiment;
  std::string curve = "circle2d";
  int d = 2;
  std::vector<double> deltas;  // empty = preset default
  double lambda = 256.0;
  int order = 0;  // N; 0 = use d
  double p = 2.0;
  double q = 2.0;
  double grid_X = 0.0;  // 0 = auto
  int grid_nx = 0;
  int grid_nt = 0;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 0;  // 0 = hardware concurrency
  double slack = 0.25;
  int samples = 1024;
  int fields = 20;
  int trials = 8;
  std::int64_t mc_samples = 1000000;

  // Canonical key=value listing of every result-affecting parameter.
  std::vector<std::pair<std::string, std::string>> canonical_params() const;
  std::string hash() const;  // excludes out_dir and workers
};

// TOML-style sections flatten to "section.key"; '#' starts a comment.
// Throws ConfigurationError with a "line N:" diagnostic on malformed input.
RunConfig parse_config_file(const std::string& path);

// Applies one key (CLI flags share this path so they override config keys).
void apply_config_key(RunConfig& config, const std::string& key,
                      const std::string& value, int line = 0);

// "2^-3..2^-7" (dyadic range), comma lists, single values; tokens may be
// plain floats or "2^k" forms.
std::vector<double> parse_delta_spec(const std::string& spec);

struct PresetInfo {
  std::string name;
  std::string parameters;
  std::string runtime_class;  // seconds | minutes
};

// Deterministically ordered; case-insensitive substring filter.
std::vector<PresetInfo> list_presets(const std::string& filter = "");

struct RunResult {
  int exit_code = 0;
  std::string output_dir;   // content-hash subdirectory
  std::string failed_stage; // nonempty when a pipeline stage failed
};

RunResult run(const RunConfig& config);

}  // namespace nikodym
