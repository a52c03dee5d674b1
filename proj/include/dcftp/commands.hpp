#pragma once

// Subcommands of the batch front-end. Each returns a process exit code:
// 0 success, 1 certificate or validation failure, 2 domination violation,
// 3 I/O or configuration error.

#include "dcftp/cftp.hpp"
#include "dcftp/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dcftp {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitViolation = 2, kExitIo = 3 };

/// Certificate from drift.certificate when set (validated), otherwise from
/// certify_chain. Throws CertificateError.
DriftCertificate resolve_certificate(const RunConfig& cfg, const ChainSpec& chain, std::ostream& log);

// Data whose output path is unset goes to `out`; diagnostics go to `log`.
int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_dominator(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// Runs a subcommand by name, mapping library errors onto exit codes.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// --out applies to the subcommand's primary output.
void apply_out_override(RunConfig& cfg, const std::string& command, const std::string& path);

/// Samples CSV: seed,sample_state,V_value,T_used,regen_events,domination_violations
void write_samples_csv(std::ostream& out, const std::vector<PerfectSample>& samples);
std::vector<PerfectSample> read_samples_csv(std::istream& in);

}  // namespace dcftp
