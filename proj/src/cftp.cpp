#include "dcftp/cftp.hpp"

#include "dcftp/error.hpp"
#include "dcftp/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace dcftp {

Mode parse_mode(const std::string& s) {
  if (s == "standard") return Mode::standard;
  if (s == "sigma_star") return Mode::sigma_star;
  throw InvalidArgument(fmt::format("unknown mode '{}'", s));
}

std::string to_string(Mode m) { return m == Mode::standard ? "standard" : "sigma_star"; }

std::vector<State> check_domination(const StateSet& S, double D, const std::vector<double>& V) {
  std::vector<State> bad;
  for (State x : S)
    if (V[x] > D) bad.push_back(x);
  return bad;
}

namespace {

void dedup(StateSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

StateSet dominated_states(const ChainSpec& chain, double D) {
  StateSet s;
  for (int x = 0; x < chain.n(); ++x)
    if (chain.V[x] <= D) s.push_back(x);
  return s;
}

}  // namespace

PerfectSampler::PerfectSampler(const ChainSpec& chain, const DriftCertificate& cert,
                               std::optional<MinorizationCert> mcert, SamplerOptions options)
    : chain_(&chain), cert_(cert), mcert_(std::move(mcert)), options_(options), powers_(chain) {
  chain.validate();
  cert_.validate();
  queue_ = QueueParams::from_certificate(cert_);
  if (options_.anchor == Anchor::time_stationary && !(queue_.sigma < 1.0 - cert_.taming.delta))
    throw CertificateError("mean pause length is infinite (sigma >= 1 - delta)");
  if (options_.max_T < 1) throw InvalidArgument("max_T must be positive");
  c_star_ = c_star(chain, cert_.h_star);
  const long floor_k = taming_F(cert_.h_star, cert_.taming);
  if (mcert_) {
    mcert_->validate(powers_, cert_.eps_cap);
    if (mcert_->C_star != c_star_) throw CertificateError("minorization is not for C* = {V <= h*}");
    if (options_.mode == Mode::sigma_star && mcert_->m <= floor_k)
      throw InvalidArgument("sigma_star mode needs a small-set order m > F(h*)");
    regen_ok_ = options_.regeneration && options_.mode == Mode::standard && floor_k >= mcert_->m &&
                regeneration_stays_low(chain, *mcert_, floor_k - mcert_->m);
  } else if (options_.mode == Mode::sigma_star) {
    throw InvalidArgument("sigma_star mode needs a minorization certificate");
  }
}

SplitKernel& PerfectSampler::split_for(long k) {
  auto it = splits_.find(k);
  if (it == splits_.end()) it = splits_.emplace(k, SplitKernel(powers_, *mcert_, k)).first;
  return it->second;
}

const MinorizationCert* PerfectSampler::span_certificate(long length) {
  auto it = span_certs_.find(length);
  if (it == span_certs_.end()) {
    std::optional<MinorizationCert> c;
    try {
      c = compute_minorization(powers_, c_star_, static_cast<int>(length),
                               std::max(cert_.eps_cap, mcert_->eps));
    } catch (const CertificateError&) {
    }
    it = span_certs_.emplace(length, std::move(c)).first;
  }
  return it->second ? &*it->second : nullptr;
}

ForwardResult PerfectSampler::evolve_forward_set(StateSet S, const EmbeddedPath& path,
                                                 const RandomnessLedger& ledger, std::int64_t from_index) {
  ForwardResult out;
  dedup(S);
  const bool sigma_mode = options_.mode == Mode::sigma_star;
  const long floor_k = taming_F(cert_.h_star, cert_.taming);
  std::int64_t j = from_index;
  while (j < 0) {
    const PathEntry& e = path.at(j);
    const LedgerRecord& rec = ledger.at(j);
    BlockUpdate blk = block_from_path(e, &rec);
    const bool floor = e.U == 0.0;
    std::int64_t next = j + 1;

    if (floor && regen_ok_) {
      RegenOutcome r = regenerative_block_update(S, blk, *mcert_, *chain_, powers_, split_for(blk.k));
      if (r.coalesced) ++out.regen_events;
      S = std::move(r.states);
    } else if (floor && sigma_mode && floor_k < mcert_->m) {
      const auto span = sigma_star_span(path, j, mcert_->m);
      const MinorizationCert* mc = span ? span_certificate(span->length) : nullptr;
      if (mc) {
        auto it = span_splits_.find(span->length);
        if (it == span_splits_.end())
          it = span_splits_.emplace(span->length, SplitKernel(powers_, *mc, span->length)).first;
        BlockUpdate composite = blk;
        composite.k = span->length;
        composite.u = std::exp(-path.at(span->end_index - 1).E);
        StateSet inside, outside;
        for (State x : S) (chain_->V[x] <= cert_.h_star ? inside : outside).push_back(x);
        RegenOutcome r = regenerative_block_update(inside, composite, *mc, *chain_, powers_, it->second);
        if (r.coalesced) ++out.regen_events;
        S = std::move(r.states);
        for (State x : outside) S.push_back(powers_.quantile(span->length, x, composite.u));
        next = span->end_index;
      } else {
        for (State& x : S) x = quantile_block_update(x, blk, cert_.taming, powers_, false);
      }
    } else {
      for (State& x : S) x = quantile_block_update(x, blk, cert_.taming, powers_, !sigma_mode);
    }
    dedup(S);
    out.domination_violations +=
        static_cast<long>(check_domination(S, path.at(next).D, chain_->V).size());
    out.sizes.push_back(S.size());
    j = next;
  }
  out.states = std::move(S);
  return out;
}

StateSet PerfectSampler::finish_partial_block(const StateSet& S, const EmbeddedPath& path,
                                              const RandomnessLedger& ledger) {
  const long age = path.age();
  if (age == 0) return S;
  const double u = ledger.at(0).tail;
  StateSet out;
  for (State x : S) out.push_back(powers_.quantile(age, x, u));
  dedup(out);
  return out;
}

PerfectSample PerfectSampler::sample(std::uint64_t seed) {
  RandomnessLedger ledger(seed);
  EmbeddedPath path(queue_, cert_.taming, options_.anchor, ledger);
  std::int64_t T = 1;
  for (;;) {
    path.extend_to(-T);
    const StateSet start = dominated_states(*chain_, path.at(-T).D);
    ForwardResult fwd = evolve_forward_set(start, path, ledger, -T);
    const StateSet final_set = finish_partial_block(fwd.states, path, ledger);
    if (final_set.size() == 1) {
      PerfectSample s;
      s.state = final_set.front();
      s.V = chain_->V[s.state];
      s.T_used = T;
      s.regen_events = fwd.regen_events;
      s.domination_violations = fwd.domination_violations;
      s.seed = seed;
      return s;
    }
    const std::int64_t span = -path.at(-T).sigma_time;
    if (span >= options_.max_T || T >= options_.max_T)
      throw NoCoalescence(fmt::format("no coalescence: {} blocks spanning {} steps left {} states (max_T = {})",
                                      T, span, final_set.size(), options_.max_T));
    T = options_.backoff == Backoff::doubling ? 2 * T : T + 1;
  }
}

PerfectSample run_perfect_sample(const ChainSpec& chain, const DriftCertificate& cert,
                                 const std::optional<MinorizationCert>& mcert, std::uint64_t seed,
                                 SamplerOptions options) {
  PerfectSampler sampler(chain, cert, mcert, options);
  return sampler.sample(seed);
}

std::vector<PerfectSample> sample_batch(const ChainSpec& chain, const DriftCertificate& cert,
                                        const std::optional<MinorizationCert>& mcert,
                                        std::uint64_t master_seed, std::size_t replicas,
                                        const SamplerOptions& options, unsigned workers) {
  std::vector<PerfectSample> out(replicas);
  if (replicas == 0) return out;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(replicas)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    try {
      PerfectSampler sampler(chain, cert, mcert, options);
      for (std::size_t i = next++; i < replicas; i = next++) out[i] = sampler.sample(replica_seed(master_seed, i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = replicas;
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

MinorizationCert minorization_for(const ChainSpec& chain, const DriftCertificate& cert, int m_max) {
  KernelPowers powers(chain);
  const StateSet C = c_star(chain, cert.h_star);
  const int m = find_small_order(powers, C, m_max);
  return compute_minorization(powers, C, m, cert.eps_cap);
}

}  // namespace dcftp
