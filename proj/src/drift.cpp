#include "dcftp/drift.hpp"

#include "dcftp/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace dcftp {

void TamingParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (!(d_prime >= 1.0) || !std::isfinite(d_prime)) throw InvalidArgument("d_prime must be >= 1");
}

long taming_F(double z, const TamingParams& t) {
  if (!(z > t.d_prime)) return 1;
  const double steps = std::ceil(t.lambda * std::pow(z, t.delta));
  if (steps >= 9.0e18) return static_cast<long>(9.0e18);
  return std::max(1L, static_cast<long>(steps));
}

double rate_bound(double delta) { return std::exp(std::log1p(-delta) / delta); }

bool validate_rate_condition(double beta, double delta) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument(fmt::format("beta = {} outside (0,1)", beta));
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument(fmt::format("delta = {} outside (0,1)", delta));
  return std::log(beta) < std::log1p(-delta) / delta;
}

double select_beta_star(double beta, double delta) {
  if (!validate_rate_condition(beta, delta)) throw CertificateError("rate condition violated");
  const double lo = std::log(beta);
  const double hi = std::log1p(-delta) / delta;
  double bs = std::exp(0.5 * (lo + hi));
  // exp can round onto an endpoint when the interval is a few ulps wide.
  if (!(std::log(bs) > lo && std::log(bs) < hi)) throw CertificateError("rate condition violated");
  return bs;
}

double h_star_margin(double z, double beta, double beta_star, double b, double b_prime,
                     const TamingParams& t, double eps_cap) {
  return (1.0 - eps_cap) * beta_star * z - beta * z - b * (t.lambda + 1.0) * std::pow(z, t.delta) - b_prime;
}

double compute_h_star(double beta, double beta_star, double b, double b_prime,
                      const TamingParams& t, double eps_cap) {
  t.validate();
  if (!(eps_cap >= 0.0 && eps_cap < 1.0)) throw InvalidArgument("eps_cap must lie in [0,1)");
  if (b < 0.0 || b_prime < 0.0) throw InvalidArgument("b and b' must be nonnegative");
  if (!((1.0 - eps_cap) * beta_star > beta)) throw CertificateError("no admissible h*");
  auto g = [&](double z) { return h_star_margin(z, beta, beta_star, b, b_prime, t, eps_cap); };

  // g is convex with g(0) = -b' <= 0, so {g < 0} is an interval starting at 0.
  if (g(t.d_prime) >= 0.0) return t.d_prime;
  double lo = t.d_prime;
  double hi = 2.0 * lo;
  while (g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw CertificateError("no admissible h*");
  }
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= 0.0 ? hi : lo) = mid;
  }
  return hi;
}

WeakDrift certify_weak_drift(const ChainSpec& chain) {
  if (chain.n() == 0) throw InvalidArgument("empty state space");
  chain.validate();
  const Vector PV = expected_v(chain, chain.P);
  WeakDrift out;
  for (int x = 0; x < chain.n(); ++x) {
    const double excess = PV[x] - chain.V[x];
    if (excess > 0.0) {
      out.C.push_back(x);
      out.b = std::max(out.b, excess);
    }
  }
  return out;
}

SubsampledDrift certify_subsampled_drift(const ChainSpec& chain, const TamingParams& t) {
  chain.validate();
  t.validate();
  const int n = chain.n();
  std::vector<long> steps(n);
  long max_steps = 0;
  for (int x = 0; x < n; ++x) {
    steps[x] = taming_F(chain.V[x], t);
    max_steps = std::max(max_steps, steps[x]);
  }
  // Iterate v_k = P^k V once and read E_x[V(X_{F(V(x))})] off at k = F(V(x)).
  std::vector<double> expected(n, 0.0);
  std::multimap<long, int> due;
  for (int x = 0; x < n; ++x) due.emplace(steps[x], x);
  Vector v = Eigen::Map<const Vector>(chain.V.data(), n);
  auto it = due.begin();
  for (long k = 1; k <= max_steps && it != due.end(); ++k) {
    v = chain.P * v;
    for (; it != due.end() && it->first == k; ++it) expected[it->second] = v[it->second];
  }

  SubsampledDrift out;
  for (int x = 0; x < n; ++x) {
    if (chain.V[x] > t.d_prime) {
      const double ratio = expected[x] / chain.V[x];
      out.beta = std::max(out.beta.value_or(0.0), ratio);
    }
  }
  if (out.beta && *out.beta >= 1.0) throw CertificateError("chain not tamed by these parameters");
  const double slope = out.beta.value_or(1.0);
  for (int x = 0; x < n; ++x) {
    if (chain.V[x] <= t.d_prime) out.b_prime = std::max(out.b_prime, expected[x] - slope * chain.V[x]);
  }
  return out;
}

// -----------------------------------------------------------------------------

void DriftCertificate::validate() const {
  taming.validate();
  if (!(eps_cap >= 0.0 && eps_cap < 1.0)) throw CertificateError("eps_cap must lie in [0,1)");
  if (!(beta > 0.0 && beta < beta_star && beta_star < 1.0))
    throw CertificateError(fmt::format("need 0 < beta < beta* < 1 (beta={}, beta*={})", beta, beta_star));
  if (!(std::log(beta_star) < std::log1p(-taming.delta) / taming.delta))
    throw CertificateError("beta* outside the admissible rate interval");
  if (b < 0.0 || b_prime < 0.0) throw CertificateError("negative drift constants");
  if (!(h_star >= taming.d_prime)) throw CertificateError("h* below d'");
  if (h_star_margin(h_star, beta, beta_star, b, b_prime, taming, eps_cap) < 0.0)
    throw CertificateError("h* does not satisfy the domination inequality");
}

double DriftCertificate::arrival_gap() const { return -std::log(beta_star); }

std::string DriftCertificate::serialize() const {
  std::string s;
  auto put = [&](const char* key, double v) { s += fmt::format("{}={:.17g}\n", key, v); };
  put("beta", beta);
  put("b", b);
  put("b_prime", b_prime);
  put("d_prime", taming.d_prime);
  put("lambda", taming.lambda);
  put("delta", taming.delta);
  put("beta_star", beta_star);
  put("eps_cap", eps_cap);
  put("h_star", h_star);
  return s;
}

DriftCertificate DriftCertificate::parse(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(fmt::format("certificate line without '=': {}", line));
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (end == val.c_str() || *end != '\0') throw IoError(fmt::format("bad value for {}: {}", key, val));
    if (!kv.emplace(key, v).second) throw IoError(fmt::format("duplicate key {}", key));
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(fmt::format("certificate is missing {}", key));
    return it->second;
  };
  DriftCertificate c;
  c.beta = get("beta");
  c.b = get("b");
  c.b_prime = get("b_prime");
  c.taming = {get("lambda"), get("delta"), get("d_prime")};
  c.beta_star = get("beta_star");
  c.eps_cap = get("eps_cap");
  c.h_star = get("h_star");
  if (kv.size() != 9) throw IoError("certificate has unknown keys");
  return c;
}

CertifyResult certify_chain(const ChainSpec& chain, const CertifyOptions& options) {
  const WeakDrift weak = certify_weak_drift(chain);
  CertifyResult result;
  for (double lambda : options.lambda_schedule) {
    CertifyAttempt attempt;
    attempt.lambda = lambda;
    const TamingParams t{lambda, options.delta, options.d_prime};
    SubsampledDrift sub;
    try {
      sub = certify_subsampled_drift(chain, t);
    } catch (const CertificateError& e) {
      attempt.note = e.what();
      result.attempts.push_back(attempt);
      continue;
    }
    attempt.beta = sub.beta;
    attempt.b_prime = sub.b_prime;
    double beta = 0.0;
    double b_prime = sub.b_prime;
    if (sub.beta) {
      beta = *sub.beta;
    } else {
      // Nothing lies above d' (so F = 1 everywhere): any contraction rate is
      // admissible. Take a quarter of the bound and charge the excess to b'.
      beta = 0.25 * rate_bound(options.delta);
      const Vector PV = expected_v(chain, chain.P);
      b_prime = 0.0;
      for (int x = 0; x < chain.n(); ++x) b_prime = std::max(b_prime, PV[x] - beta * chain.V[x]);
    }
    if (!validate_rate_condition(beta, options.delta)) {
      attempt.note = "rate condition violated";
      result.attempts.push_back(attempt);
      continue;
    }
    DriftCertificate cert;
    cert.b = weak.b;
    cert.C = weak.C;
    cert.beta = beta;
    cert.b_prime = b_prime;
    cert.taming = t;
    cert.eps_cap = options.eps_cap;
    cert.beta_star = select_beta_star(beta, options.delta);
    try {
      cert.h_star = compute_h_star(beta, cert.beta_star, cert.b, cert.b_prime, t, options.eps_cap);
    } catch (const CertificateError& e) {
      attempt.note = e.what();
      result.attempts.push_back(attempt);
      continue;
    }
    attempt.accepted = true;
    result.attempts.push_back(attempt);
    result.certificate = cert;
    break;
  }
  return result;
}

}  // namespace dcftp
