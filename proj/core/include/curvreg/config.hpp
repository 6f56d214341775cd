#pragma once

#include <string>

#include "curvreg/pipeline.hpp"

namespace curvreg {

/// Everything a batch run needs: the registration pipeline parameters plus
/// evaluation settings. Loaded from a versioned key=value file; every
/// default below is also the file default, so an empty file (apart from
/// config_version=1) reproduces the stock behaviour.
struct RunConfig {
  PipelineConfig pipeline;
  double voxel_size = 0.1;                   // meters; map decimation, 0 = off
  int stride = 1;                            // register scan i against i+stride
  double rotation_failure_threshold = 0.1;   // radians
  uint64_t seed = 0;

  void validate() const;
};

/// Parses `key=value` lines ('#' comments and blank lines ignored). Requires
/// `config_version=1`; rejects unknown keys and out-of-range values.
/// Throws InvalidConfig / ParseError.
RunConfig load_run_config(const std::string& path);

/// Writes the full key set with the given values; load_run_config round-trips.
void write_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace curvreg
