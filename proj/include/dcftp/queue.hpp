#pragma once

// The dominating process: U is the workload of a D/M/1 queue observed at
// arrival epochs (deterministic inter-arrival a, Exp(1) service),
// D = h* exp(U) is its exponentiated, floored image, and D is paused for
// F(D) time units between moves.

#include "dcftp/drift.hpp"
#include "dcftp/error.hpp"
#include "dcftp/ledger.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <string>

namespace dcftp {

/// Unique root in (0,1) of sigma = exp(-a (1 - sigma)). Throws
/// InvalidArgument "unstable queue: requires beta* < e^-1" unless a > 1.
double sigma_root(double a);

struct QueueParams {
  double a = 0.0;       // inter-arrival time log(1/beta*), rounded down to the path grid
  double sigma = 0.0;   // GI/M/1 root
  double h_star = 1.0;  // floor of D

  static QueueParams from_certificate(const DriftCertificate& cert);
  static QueueParams make(double a, double h_star);
};

/// Inverse CDF of the stationary workload: atom 1-sigma at 0 and tail
/// P(U > x) = sigma exp(-(1-sigma) x).
double stationary_sample(const QueueParams& q, double u);

/// Stationary CDF P(U <= x).
double stationary_cdf(const QueueParams& q, double x);

/// Lindley recursion max(U + E - a, 0).
double lindley_forward(double U, double E, double a);

/// One draw from the time reversal of the stationary Lindley chain: the law
/// of U_prev given U_next. `uniforms` yields iid uniforms on (0,1); the first
/// decides the atom at 0, the rest drive the continuous part.
template <class UniformSource>
double reversed_step(double U_next, const QueueParams& q, UniformSource&& uniforms);

/// Atom probability P(U_prev = 0 | U_next) of the reversed kernel.
double reversed_atom_probability(double U_next, const QueueParams& q);

/// Innovation E for a transition U_prev -> U_next such that
/// lindley_forward(U_prev, E, a) == U_next. If U_next > 0, E is determined;
/// if U_next == 0, E is Exp(1) truncated to (0, a - U_prev], driven by u.
/// Throws InvalidArgument for an impossible pair.
double reconstruct_innovation(double U_prev, double U_next, double a, double u);

/// Stationary law of the current workload at a fixed time for the paused
/// process: the embedded law reweighted by the pause length F(h* e^U).
/// Proper iff the mean pause is finite (sigma < 1 - delta).
template <class UniformSource>
double length_biased_sample(const QueueParams& q, const TamingParams& t, UniformSource&& uniforms);

/// Where the dominator's move index 0 sits relative to absolute time 0.
enum class Anchor {
  // Time 0 is a fixed, typical time: U_0 is length-biased and time 0 falls
  // uniformly inside the pause that starts at sigma_0 <= 0.
  time_stationary,
  // Time 0 is a move time (sigma_0 = 0) and U_0 has the embedded law.
  move_time,
};

Anchor parse_anchor(const std::string& s);
std::string to_string(Anchor a);

struct PathEntry {
  std::int64_t move_index = 0;
  double U = 0.0;
  double D = 0.0;
  std::int64_t sigma_time = 0;  // absolute time of this move
  double E = 0.0;               // innovation for the step j -> j+1
  long gap = 0;                 // F(D_j) = sigma_{j+1} - sigma_j
};

/// Dominating path at move indices j <= 0, grown backwards, append-only at
/// the past end. Index 0 holds the anchor; `age` = -sigma_0 is how far time 0
/// lies inside the pause starting at move 0.
class EmbeddedPath {
 public:
  EmbeddedPath(QueueParams q, TamingParams t, Anchor anchor, RandomnessLedger& ledger);

  const QueueParams& queue() const { return q_; }
  const TamingParams& taming() const { return t_; }
  Anchor anchor() const { return anchor_; }

  std::int64_t min_index() const { return -static_cast<std::int64_t>(entries_.size()) + 1; }
  const PathEntry& at(std::int64_t j) const;
  long age() const { return static_cast<long>(-entries_.front().sigma_time); }

  /// Grow to move index `target` (<= 0) using the ledger slots of each new
  /// index; existing entries are untouched.
  void extend_to(std::int64_t target);

  /// Entries from min_index() to 0.
  std::vector<PathEntry> entries() const;

 private:
  QueueParams q_;
  TamingParams t_;
  Anchor anchor_;
  RandomnessLedger* ledger_;
  std::deque<PathEntry> entries_;  // front is index 0, back is min_index()
};

/// Free-standing form of EmbeddedPath::extend_to.
void extend_grid_backward(EmbeddedPath& path, std::int64_t target_move_index);

/// CSV columns: move_index,sigma_time,U,D,E,gap (most negative first).
void write_trace_csv(std::ostream& out, const std::vector<PathEntry>& entries);

// -----------------------------------------------------------------------------

namespace detail {
// Path workloads and a are multiples of 2^-kGridBits, which makes the Lindley
// step U + E - a exact in double precision (for U below 2^12).
inline constexpr int kGridBits = 40;
double on_grid(double U);
double reversed_continuous_draw(double U_next, const QueueParams& q, double u);
double truncated_exp(double rate, double upper, double u);
}  // namespace detail

template <class UniformSource>
double reversed_step(double U_next, const QueueParams& q, UniformSource&& uniforms) {
  const double u1 = uniforms();
  if (U_next > 0.0) {
    if (u1 <= reversed_atom_probability(U_next, q)) return 0.0;
    return detail::reversed_continuous_draw(U_next, q, uniforms());
  }
  // U_next == 0: atom w.p. 1 - e^{-a}; otherwise density proportional to
  // e^{-(1-sigma) w} (1 - e^{w-a}) on (0, a).
  if (u1 <= -std::expm1(-q.a)) return 0.0;
  const double rate = 1.0 - q.sigma;
  for (;;) {
    const double w = detail::truncated_exp(rate, q.a, uniforms());
    const double accept = -std::expm1(w - q.a);
    if (uniforms() <= accept && w > 0.0) return w;
  }
}

template <class UniformSource>
double length_biased_sample(const QueueParams& q, const TamingParams& t, UniformSource&& uniforms) {
  const double s = q.sigma;
  const double tilt = 1.0 - s - t.delta;
  if (!(tilt > 0.0)) throw InvalidArgument("mean pause is infinite: need sigma < 1 - delta");
  // Envelope F(h e^u) <= 1 + lambda h^delta e^{delta u}; acceptance >= 1/2.
  const double c = t.lambda * std::pow(q.h_star, t.delta);
  const double mass_plain = 1.0;
  const double mass_tilted = c * ((1.0 - s) + s * (1.0 - s) / tilt);
  const double tilted_atom = c * (1.0 - s) / mass_tilted;
  for (;;) {
    double u;
    if (uniforms() * (mass_plain + mass_tilted) < mass_plain) {
      u = stationary_sample(q, uniforms());
    } else if (uniforms() < tilted_atom) {
      u = 0.0;
    } else {
      u = -std::log(uniforms()) / tilt;
    }
    const double z = q.h_star * std::exp(u);
    const double envelope = 1.0 + c * std::exp(t.delta * u);
    if (uniforms() * envelope <= static_cast<double>(taming_F(z, t))) return u;
  }
}

}  // namespace dcftp
