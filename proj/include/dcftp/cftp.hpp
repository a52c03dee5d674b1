#pragma once

// Dominated coupling from the past over a finite chain.

#include "dcftp/chain.hpp"
#include "dcftp/coupling.hpp"
#include "dcftp/drift.hpp"
#include "dcftp/ledger.hpp"
#include "dcftp/queue.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dcftp {

enum class Mode { standard, sigma_star };
enum class Backoff { doubling, increment };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct SamplerOptions {
  Mode mode = Mode::standard;
  Anchor anchor = Anchor::time_stationary;
  Backoff backoff = Backoff::doubling;
  std::int64_t max_T = std::int64_t{1} << 20;  // cap on |sigma_{-T}| in time steps
  bool regeneration = true;                    // use the minorization when supplied
};

struct PerfectSample {
  State state = 0;
  double V = 0.0;
  std::int64_t T_used = 0;       // move blocks in the coalescing run
  long regen_events = 0;
  long domination_violations = 0;
  std::uint64_t seed = 0;

  bool operator==(const PerfectSample&) const = default;
};

/// States of S with V(x) > D.
std::vector<State> check_domination(const StateSet& S, double D, const std::vector<double>& V);

struct ForwardResult {
  StateSet states;                  // at move index 0
  std::vector<std::size_t> sizes;   // |S| after each block
  long regen_events = 0;
  long domination_violations = 0;
};

class PerfectSampler {
 public:
  PerfectSampler(const ChainSpec& chain, const DriftCertificate& cert,
                 std::optional<MinorizationCert> mcert, SamplerOptions options = {});

  const ChainSpec& chain() const { return *chain_; }
  const DriftCertificate& certificate() const { return cert_; }
  const SamplerOptions& options() const { return options_; }
  const std::optional<MinorizationCert>& minorization() const { return mcert_; }
  bool floor_regeneration_enabled() const { return regen_ok_; }
  KernelPowers& powers() { return powers_; }

  PerfectSample sample(std::uint64_t seed);

  /// Block-by-block evolution of S from move index `from_index` to 0.
  ForwardResult evolve_forward_set(StateSet S, const EmbeddedPath& path, const RandomnessLedger& ledger,
                                   std::int64_t from_index);

  /// The partial pause from sigma_0 to time 0, at the shared tail uniform.
  StateSet finish_partial_block(const StateSet& S, const EmbeddedPath& path, const RandomnessLedger& ledger);

 private:
  SplitKernel& split_for(long k);
  const MinorizationCert* span_certificate(long length);

  const ChainSpec* chain_;
  DriftCertificate cert_;
  std::optional<MinorizationCert> mcert_;
  SamplerOptions options_;
  QueueParams queue_;
  KernelPowers powers_;
  StateSet c_star_;
  bool regen_ok_ = false;
  std::map<long, SplitKernel> splits_;
  std::map<long, std::optional<MinorizationCert>> span_certs_;
  std::map<long, SplitKernel> span_splits_;
};

/// One perfect sample.
PerfectSample run_perfect_sample(const ChainSpec& chain, const DriftCertificate& cert,
                                 const std::optional<MinorizationCert>& mcert, std::uint64_t seed,
                                 SamplerOptions options = {});

/// `replicas` samples at seeds replica_seed(master_seed, i), in replica order.
/// Each worker owns its own sampler; nothing mutable is shared.
std::vector<PerfectSample> sample_batch(const ChainSpec& chain, const DriftCertificate& cert,
                                        const std::optional<MinorizationCert>& mcert,
                                        std::uint64_t master_seed, std::size_t replicas,
                                        const SamplerOptions& options, unsigned workers = 1);

/// Minorization for C* = {V <= h*} at the smallest order <= m_max, with the
/// certificate's eps_cap.
MinorizationCert minorization_for(const ChainSpec& chain, const DriftCertificate& cert, int m_max = 16);

}  // namespace dcftp
