#pragma once

// Run configuration: a JSON document with four fixed sections.
//
//   chain  : {"builtin": "poly_rw" | "regen_chain" | "three_state", ...params}
//            or {"matrix_file": PATH}
//   drift  : d_prime, lambda_schedule, delta, eps_cap, optional certificate PATH
//   run    : seed, replicas, workers, mode, experimental, anchor, backoff,
//            max_T, regeneration, m_max, blocks, threshold, bins
//   output : certificate, samples, trace, report
//
// Unknown keys anywhere are rejected.

#include "dcftp/cftp.hpp"
#include "dcftp/chain.hpp"
#include "dcftp/drift.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcftp {

struct ChainConfig {
  std::string builtin;      // empty when matrix_file is used
  std::string matrix_file;
  // poly_rw
  int N = 1024;
  double delta = 0.5;
  double c_down = 0.6;
  double c_up = 0.4;
  // regen_chain
  double eps_built = 0.2;
  int m_mode = 1;

  bool operator==(const ChainConfig&) const = default;
};

struct DriftConfig {
  double d_prime = 0.0;
  std::vector<double> lambda_schedule{2.0, 4.0, 6.0, 8.0};
  double delta = 0.5;
  double eps_cap = 0.0;
  std::string certificate;  // load instead of certifying when set

  bool operator==(const DriftConfig&) const = default;
};

struct RunSection {
  std::uint64_t seed = 0;
  std::uint64_t replicas = 1;
  unsigned workers = 1;
  Mode mode = Mode::standard;
  bool experimental = false;
  Anchor anchor = Anchor::time_stationary;
  Backoff backoff = Backoff::doubling;
  std::int64_t max_T = std::int64_t{1} << 20;
  bool regeneration = true;
  int m_max = 16;
  std::int64_t blocks = 100000;  // dominator path length
  double threshold = 0.001;      // validation p-value threshold
  std::uint64_t bins = 0;        // 0: per-state for N <= 64, else 50 V-bins

  bool operator==(const RunSection&) const = default;
};

struct OutputSection {
  std::string certificate;
  std::string samples;
  std::string trace;
  std::string report;

  bool operator==(const OutputSection&) const = default;
};

struct RunConfig {
  ChainConfig chain;
  DriftConfig drift;
  RunSection run;
  OutputSection output;

  bool operator==(const RunConfig&) const = default;
};

/// Parses and schema-checks a config document. Throws ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Effective configuration with every default filled in; parse_config of the
/// result gives back an identical RunConfig.
std::string effective_config_json(const RunConfig& cfg, int indent = -1);

ChainSpec build_chain(const ChainConfig& cfg);
CertifyOptions certify_options(const DriftConfig& cfg);
SamplerOptions sampler_options(const RunSection& run);

}  // namespace dcftp
