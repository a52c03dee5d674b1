#include "dcftp/coupling.hpp"

#include "dcftp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace dcftp {

BlockUpdate block_from_path(const PathEntry& entry, const LedgerRecord* record) {
  BlockUpdate blk;
  blk.z = entry.D;
  blk.k = entry.gap;
  blk.E = entry.E;
  blk.u = std::exp(-entry.E);
  if (record) blk.regen = RegenDraws{record->regen, record->nu};
  return blk;
}

StateSet c_star(const ChainSpec& chain, double h_star) {
  StateSet out;
  for (int x = 0; x < chain.n(); ++x)
    if (chain.V[x] <= h_star) out.push_back(x);
  return out;
}

State quantile_block_update(State x, const BlockUpdate& blk, const TamingParams& t,
                            KernelPowers& powers, bool enforce_bound) {
  const ChainSpec& chain = powers.chain();
  if (x < 0 || x >= chain.n()) throw InvalidArgument(fmt::format("state {} out of range", x));
  if (enforce_bound && chain.V[x] > blk.z)
    throw ContractViolation(fmt::format("V({}) = {} exceeds the dominating value {}", x, chain.V[x], blk.z));
  if (blk.k != taming_F(blk.z, t))
    throw ContractViolation(fmt::format("block length {} differs from F(z) = {}", blk.k, taming_F(blk.z, t)));
  return powers.quantile(blk.k, x, blk.u);
}

// -----------------------------------------------------------------------------

void MinorizationCert::validate(KernelPowers& powers, double eps_cap) const {
  const ChainSpec& chain = powers.chain();
  if (!(eps > 0.0 && eps <= 1.0)) throw CertificateError("minorization mass must lie in (0,1]");
  if (eps > eps_cap) throw CertificateError("minorization mass exceeds eps_cap");
  if (nu.size() != chain.n()) throw CertificateError("nu has the wrong length");
  std::vector<char> in_c(chain.n(), 0);
  for (State x : C_star) in_c[x] = 1;
  for (int y = 0; y < chain.n(); ++y) {
    if (nu[y] < 0.0) throw CertificateError("nu has negative mass");
    if (nu[y] > 0.0 && !in_c[y]) throw CertificateError(fmt::format("nu charges state {} outside C*", y));
  }
  const Matrix& Pm = powers.power(m);
  for (State x : C_star)
    for (int y = 0; y < chain.n(); ++y)
      if (Pm(x, y) < eps * nu[y])
        throw CertificateError(fmt::format("P^{}({},{}) < eps nu({})", m, x, y, y));
}

std::string MinorizationCert::serialize() const {
  std::string s = fmt::format("m={}\neps={:.17g}\nsupport_size={}\n", m, eps,
                              static_cast<long>((nu.array() > 0.0).count()));
  for (Eigen::Index y = 0; y < nu.size(); ++y)
    if (nu[y] > 0.0) s += fmt::format("nu_{}={:.17g}\n", y, nu[y]);
  return s;
}

MinorizationCert compute_minorization(KernelPowers& powers, const StateSet& C_star, int m,
                                      double eps_cap) {
  const ChainSpec& chain = powers.chain();
  if (m < 1) throw InvalidArgument("small-set order must be >= 1");
  if (C_star.empty()) throw CertificateError("C* is empty");
  if (!(eps_cap > 0.0 && eps_cap <= 1.0)) throw CertificateError("eps_cap leaves no regeneration mass");
  const Matrix& Pm = powers.power(m);
  const int n = chain.n();
  Vector mu = Vector::Zero(n);
  for (State y : C_star) {
    double lo = std::numeric_limits<double>::infinity();
    for (State x : C_star) lo = std::min(lo, Pm(x, y));
    mu[y] = lo;
  }
  const double raw = mu.sum();
  if (!(raw > 0.0)) throw CertificateError("C* is not m-small for this m");

  MinorizationCert cert;
  cert.m = m;
  cert.C_star = C_star;
  cert.raw_mass = raw;
  cert.nu = mu / raw;
  cert.eps = std::min(raw, eps_cap);
  // eps * (mu / raw) can land an ulp above mu; shave eps until the check is exact.
  for (;;) {
    bool ok = true;
    for (State x : C_star) {
      for (State y : C_star) {
        if (Pm(x, y) < cert.eps * cert.nu[y]) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) break;
    cert.eps *= 1.0 - 0x1.0p-50;
  }
  return cert;
}

int find_small_order(KernelPowers& powers, const StateSet& C_star, int m_max) {
  if (m_max < 1) throw InvalidArgument("m_max must be >= 1");
  for (int m = 1; m <= m_max; ++m) {
    const Matrix& Pm = powers.power(m);
    for (State y : C_star) {
      double lo = std::numeric_limits<double>::infinity();
      for (State x : C_star) lo = std::min(lo, Pm(x, y));
      if (lo > 0.0) return m;
    }
  }
  throw CertificateError(fmt::format("no small-set order <= {}", m_max));
}

bool regeneration_stays_low(const ChainSpec& chain, const MinorizationCert& cert, long steps) {
  const int n = chain.n();
  std::vector<char> in_c(n, 0), seen(n, 0);
  for (State x : cert.C_star) in_c[x] = 1;
  std::vector<State> frontier;
  for (int y = 0; y < n; ++y)
    if (cert.nu[y] > 0.0) {
      if (!in_c[y]) return false;
      seen[y] = 1;
      frontier.push_back(y);
    }
  for (long s = 0; s < steps && !frontier.empty(); ++s) {
    std::vector<State> next;
    for (State x : frontier)
      for (int y = 0; y < n; ++y)
        if (chain.P(x, y) > 0.0 && !seen[y]) {
          if (!in_c[y]) return false;
          seen[y] = 1;
          next.push_back(y);
        }
    frontier = std::move(next);
  }
  return true;
}

// -----------------------------------------------------------------------------

namespace {

std::vector<double> v_ordered_cdf(const ChainSpec& chain, const Vector& row) {
  const auto& order = chain.v_order();
  std::vector<double> cdf(order.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    acc += row[order[i]];
    cdf[i] = acc;
  }
  return cdf;
}

State invert(const ChainSpec& chain, const std::vector<double>& cdf, double t) {
  std::size_t i;
  if (t <= 0.0) {
    i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), 0.0) - cdf.begin());
    if (i == cdf.size()) i = 0;
  } else {
    i = cdf_search(cdf, t);
  }
  return chain.v_order()[i];
}

}  // namespace

SplitKernel::SplitKernel(KernelPowers& powers, const MinorizationCert& cert, long k)
    : powers_(&powers), cert_(&cert), k_(k) {
  if (k < cert.m) throw ContractViolation("block shorter than the small-set order");
  tail_ = (cert.nu.transpose() * powers.power(k - cert.m)).transpose();
  nu_cdf_ = v_ordered_cdf(powers.chain(), cert.nu);
  residual_cdf_.resize(powers.chain().n());
}

Vector SplitKernel::residual_row(State x) {
  const double eps = cert_->eps;
  if (eps >= 1.0) return Vector::Zero(powers_->chain().n());
  Vector r = (powers_->row(k_, x) - eps * tail_) / (1.0 - eps);
  return r.cwiseMax(0.0);
}

const std::vector<double>& SplitKernel::residual_cdf(State x) {
  auto& slot = residual_cdf_[x];
  if (slot.empty()) slot = v_ordered_cdf(powers_->chain(), residual_row(x));
  return slot;
}

Vector SplitKernel::reconstructed_row(State x) {
  return cert_->eps * tail_ + (1.0 - cert_->eps) * residual_row(x);
}

RegenOutcome regenerative_block_update(const StateSet& S, const BlockUpdate& blk,
                                       const MinorizationCert& cert, const ChainSpec& chain,
                                       KernelPowers& powers, SplitKernel& split) {
  if (!blk.regen) throw InvalidArgument("regenerative block without regeneration draws");
  if (blk.k < cert.m) throw ContractViolation("block shorter than the small-set order");
  if (split.k() != blk.k) throw InvalidArgument("split kernel built for another block length");
  std::vector<char> in_c(chain.n(), 0);
  for (State x : cert.C_star) in_c[x] = 1;
  for (State x : S)
    if (!in_c[x]) throw ContractViolation(fmt::format("state {} lies outside C*", x));

  RegenOutcome out;
  if (S.empty()) return out;
  if (blk.regen->bernoulli < cert.eps) {
    const State y = invert(chain, split.nu_cdf(), blk.regen->nu_u);
    const State w = powers.quantile(blk.k - cert.m, y, blk.u);
    out.states = {w};
    out.coalesced = true;
    return out;
  }
  const double t = 1.0 - blk.u;
  for (State x : S) out.states.push_back(invert(chain, split.residual_cdf(x), t));
  std::sort(out.states.begin(), out.states.end());
  out.states.erase(std::unique(out.states.begin(), out.states.end()), out.states.end());
  return out;
}

// -----------------------------------------------------------------------------

std::optional<long> sigma_star_offset(const std::vector<long>& gaps, int m) {
  long offset = 0;
  for (std::size_t i = 1; i <= gaps.size(); ++i) {
    offset += gaps[i - 1];
    if (i >= 2 && offset >= m) return offset;
  }
  return std::nullopt;
}

std::optional<SigmaStarSpan> sigma_star_span(const EmbeddedPath& path, std::int64_t floor_index, int m) {
  if (floor_index > 0 || floor_index < path.min_index())
    throw InvalidArgument("floor index outside the path; extend backward first");
  const std::int64_t base = path.at(floor_index).sigma_time;
  SigmaStarSpan span;
  for (std::int64_t i = 1; floor_index + i <= 0; ++i) {
    const PathEntry& e = path.at(floor_index + i);
    span.spanned.push_back(floor_index + i - 1);
    if (i >= 2 && e.sigma_time - base >= m) {
      span.sigma_star = e.sigma_time;
      span.end_index = floor_index + i;
      span.length = static_cast<long>(e.sigma_time - base);
      return span;
    }
  }
  return std::nullopt;
}

}  // namespace dcftp
