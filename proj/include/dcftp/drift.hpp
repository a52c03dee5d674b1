#pragma once

// Numerical certificates for the drift hypotheses that make a dominating
// process exist: weak drift PV <= V + b 1_C, the taming function F, geometric
// drift of the F-subsampled chain, and the floor h* of the dominator.

#include "dcftp/chain.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dcftp {

struct TamingParams {
  double lambda = 1.0;   // scale, > 0
  double delta = 0.5;    // exponent, in (0,1)
  double d_prime = 1.0;  // threshold on the V-scale, >= 1

  void validate() const;
};

/// F(z) = ceil(lambda z^delta) for z > d', 1 otherwise.
long taming_F(double z, const TamingParams& t);

/// Upper end of the admissible contraction rates: (1-delta)^(1/delta).
double rate_bound(double delta);

/// log(beta) < log(1-delta)/delta, strictly. Throws InvalidArgument unless
/// both arguments lie in (0,1).
bool validate_rate_condition(double beta, double delta);

/// Log-midpoint of (log beta, log(1-delta)/delta). Throws CertificateError
/// "rate condition violated" if the interval is empty.
double select_beta_star(double beta, double delta);

/// Smallest z >= d' such that beta z + b' + b(lambda+1) z^delta <=
/// (1-eps_cap) beta* z holds for every larger z. Throws CertificateError
/// "no admissible h*" when (1-eps_cap) beta* <= beta.
double compute_h_star(double beta, double beta_star, double b, double b_prime,
                      const TamingParams& t, double eps_cap);

/// Slack (1-eps_cap) beta* z - beta z - b(lambda+1) z^delta - b'.
double h_star_margin(double z, double beta, double beta_star, double b, double b_prime,
                     const TamingParams& t, double eps_cap);

struct WeakDrift {
  double b = 0.0;
  StateSet C;  // {x : (PV)(x) > V(x)}
};

WeakDrift certify_weak_drift(const ChainSpec& chain);

struct SubsampledDrift {
  // Unset when no state has V > d' (the contraction constraint is vacuous).
  std::optional<double> beta;
  double b_prime = 0.0;
};

/// beta = max_{V(x) > d'} E_x[V(X_F(V(x)))] / V(x) with exact matrix powers;
/// b' = max_{V(x) <= d'} max(0, E_x[V(X_F)] - beta V(x)). Throws
/// CertificateError "chain not tamed by these parameters" if beta >= 1.
/// When beta is unset, b' is measured against V itself.
SubsampledDrift certify_subsampled_drift(const ChainSpec& chain, const TamingParams& t);

struct DriftCertificate {
  double b = 0.0;
  StateSet C;
  double beta = 0.0;
  double b_prime = 0.0;
  TamingParams taming;
  double beta_star = 0.0;
  double eps_cap = 0.0;
  double h_star = 0.0;

  /// Re-checks the rate interval and the h* margin at h*; throws CertificateError.
  void validate() const;

  /// a = log(1/beta*), the deterministic inter-arrival of the dominating queue.
  double arrival_gap() const;

  /// Flat "key=value" lines, 17 significant digits.
  std::string serialize() const;
  static DriftCertificate parse(const std::string& text);
};

struct CertifyOptions {
  double d_prime = 1.0;
  double delta = 0.5;
  std::vector<double> lambda_schedule{2.0, 4.0, 6.0, 8.0};
  double eps_cap = 0.0;
};

struct CertifyAttempt {
  double lambda = 0.0;
  std::optional<double> beta;
  double b_prime = 0.0;
  bool accepted = false;
  std::string note;
};

struct CertifyResult {
  std::optional<DriftCertificate> certificate;
  std::vector<CertifyAttempt> attempts;
};

/// Weak drift, then the lambda schedule in order until the rate condition
/// accepts; then beta* and h*.
CertifyResult certify_chain(const ChainSpec& chain, const CertifyOptions& options);

}  // namespace dcftp
