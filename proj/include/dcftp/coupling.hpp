#pragma once

// Coupling of target-chain blocks beneath the dominating jumps, and
// small-set regeneration by Nummelin splitting.

#include "dcftp/chain.hpp"
#include "dcftp/drift.hpp"
#include "dcftp/queue.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcftp {

struct MinorizationCert {
  int m = 1;
  double eps = 0.0;        // regeneration mass actually used
  Vector nu;               // probability vector supported on C_star
  StateSet C_star;         // {x : V(x) <= h*}
  double raw_mass = 0.0;   // total overlap before capping

  /// Exact entrywise check P^m(x, .) >= eps nu for x in C_star, support of nu
  /// inside C_star, eps <= eps_cap. Throws CertificateError.
  void validate(KernelPowers& powers, double eps_cap) const;

  /// m, eps, support size and the nu entries as "key=value" lines.
  std::string serialize() const;
};

struct RegenDraws {
  double bernoulli = 0.0;  // success iff bernoulli < eps
  double nu_u = 0.0;
};

struct BlockUpdate {
  double z = 0.0;      // dominating value at block start
  long k = 1;          // block length F(z)
  double E = 0.0;      // dominator innovation for this move
  double u = 0.5;      // quantile uniform, exp(-E)
  std::optional<RegenDraws> regen;
};

/// Block descriptor for move j of a dominating path.
BlockUpdate block_from_path(const PathEntry& entry, const LedgerRecord* record);

StateSet c_star(const ChainSpec& chain, double h_star);

/// (1-u)-quantile of P^k(x, .) in V-order. Requires V(x) <= z (unless
/// enforce_bound is false) and k == F(z).
State quantile_block_update(State x, const BlockUpdate& blk, const TamingParams& t,
                            KernelPowers& powers, bool enforce_bound = true);

/// mu(y) = min_{x in C*} P^m(x,y) for y in C*; eps = min(sum mu, eps_cap);
/// nu = mu / sum mu. Throws CertificateError "C* is not m-small for this m".
MinorizationCert compute_minorization(KernelPowers& powers, const StateSet& C_star, int m,
                                      double eps_cap);

/// Smallest m <= m_max with a nonzero restricted overlap.
int find_small_order(KernelPowers& powers, const StateSet& C_star, int m_max);

/// True iff every state reachable from support(nu) in at most `steps` steps
/// lies in C*. Regeneration is only used when this holds for k - m.
bool regeneration_stays_low(const ChainSpec& chain, const MinorizationCert& cert, long steps);

/// Precomputed pieces of the split kernel for a block length k.
class SplitKernel {
 public:
  SplitKernel(KernelPowers& powers, const MinorizationCert& cert, long k);

  long k() const { return k_; }
  /// V-ordered CDF of nu.
  const std::vector<double>& nu_cdf() const { return nu_cdf_; }
  /// (P^k(x,.) - eps nu P^{k-m}) / (1 - eps), V-ordered CDF.
  const std::vector<double>& residual_cdf(State x);
  /// eps nu P^{k-m} + (1-eps) residual, natural order (splitting identity).
  Vector reconstructed_row(State x);
  Vector residual_row(State x);

 private:
  KernelPowers* powers_;
  const MinorizationCert* cert_;
  long k_;
  Vector tail_;  // nu P^{k-m}
  std::vector<double> nu_cdf_;
  std::vector<std::vector<double>> residual_cdf_;
};

struct RegenOutcome {
  StateSet states;
  bool coalesced = false;
};

/// Floor-block update (blk.z = h*) with a shared regeneration attempt. On
/// success every state moves to the same nu-draw, advanced k-m steps at the
/// shared quantile; otherwise each state takes the (1-u)-quantile of its
/// residual block law. Per-state marginal is exactly P^k(x, .).
RegenOutcome regenerative_block_update(const StateSet& S, const BlockUpdate& blk,
                                       const MinorizationCert& cert, const ChainSpec& chain,
                                       KernelPowers& powers, SplitKernel& split);

struct SigmaStarSpan {
  std::int64_t sigma_star = 0;          // absolute time
  std::int64_t end_index = 0;           // move index whose time is sigma_star
  std::vector<std::int64_t> spanned;    // blocks j .. end_index - 1
  long length = 0;                      // sigma_star - sigma_j
};

/// First move time sigma_{j+i}, i >= 2, with sigma_{j+i} - sigma_j >= m.
/// Returns nullopt if the path ends (index 0) before such a time.
std::optional<SigmaStarSpan> sigma_star_span(const EmbeddedPath& path, std::int64_t floor_index, int m);

/// Same rule over a plain list of gaps measured from the floor move.
std::optional<long> sigma_star_offset(const std::vector<long>& gaps, int m);

}  // namespace dcftp
