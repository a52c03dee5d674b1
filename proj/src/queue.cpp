#include "dcftp/queue.hpp"

#include "dcftp/error.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace dcftp {

double sigma_root(double a) {
  if (!(a > 1.0) || !std::isfinite(a)) throw InvalidArgument("unstable queue: requires beta* < e^-1");
  auto h = [a](double s) { return s - std::exp(-a * (1.0 - s)); };
  // h(0) < 0, h(1) = 0 and h'(1) = 1 - a < 0, so h > 0 just below 1.
  double lo = 0.0;
  double hi = 0.5;
  while (h(hi) <= 0.0) {
    lo = hi;
    hi = 0.5 * (hi + 1.0);
    if (1.0 - hi < 1e-15) throw InvalidArgument("unstable queue: requires beta* < e^-1");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

QueueParams QueueParams::make(double a, double h_star) {
  QueueParams q;
  // Rounding a down keeps e^{-a} >= beta*, so the dominator only gets larger.
  q.a = std::ldexp(std::floor(std::ldexp(a, detail::kGridBits)), -detail::kGridBits);
  q.sigma = sigma_root(a);
  q.h_star = h_star;
  return q;
}

QueueParams QueueParams::from_certificate(const DriftCertificate& cert) {
  return make(cert.arrival_gap(), cert.h_star);
}

namespace detail {
double on_grid(double U) { return std::ldexp(std::floor(std::ldexp(U, kGridBits)), -kGridBits); }
}  // namespace detail

double stationary_sample(const QueueParams& q, double u) {
  if (u <= 1.0 - q.sigma) return 0.0;
  return -std::log((1.0 - u) / q.sigma) / (1.0 - q.sigma);
}

double stationary_cdf(const QueueParams& q, double x) {
  if (x < 0.0) return 0.0;
  return 1.0 - q.sigma * std::exp(-(1.0 - q.sigma) * x);
}

double lindley_forward(double U, double E, double a) {
  const double w = U + E - a;
  return w > 0.0 ? w : 0.0;
}

double reversed_atom_probability(double U_next, const QueueParams& q) {
  if (U_next > 0.0) return std::exp(-q.sigma * (U_next + q.a));
  return -std::expm1(-q.a);
}

namespace detail {

double reversed_continuous_draw(double U_next, const QueueParams& q, double u) {
  // Density proportional to e^{sigma w} on (0, L), L = U_next + a:
  // w = log(1 + u (e^{sigma L} - 1)) / sigma, rearranged to avoid overflow.
  const double L = U_next + q.a;
  const double w = L + std::log(u + (1.0 - u) * std::exp(-q.sigma * L)) / q.sigma;
  return std::min(std::max(w, 0.0), L);
}

double truncated_exp(double rate, double upper, double u) {
  return -std::log1p(u * std::expm1(-rate * upper)) / rate;
}

}  // namespace detail

double reconstruct_innovation(double U_prev, double U_next, double a, double u) {
  if (U_prev < 0.0 || U_next < 0.0) throw InvalidArgument("workloads must be nonnegative");
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (U_next > 0.0) {
    double E = U_next - U_prev + a;
    if (!(E > 0.0)) throw InvalidArgument("inconsistent workload pair: no positive innovation");
    // Round-off can leave U_prev + E - a an ulp away from U_next; walk E.
    for (int i = 0; i < 256; ++i) {
      const double got = lindley_forward(U_prev, E, a);
      if (got == U_next) return E;
      const double next = got < U_next ? std::nextafter(E, inf) : std::nextafter(E, 0.0);
      const double after = lindley_forward(U_prev, next, a);
      if (got < U_next && after > U_next) return E;  // unreachable exactly; stay below
      E = next;
    }
    return E;
  }
  const double room = a - U_prev;
  if (!(room > 0.0)) throw InvalidArgument("inconsistent workload pair: empty queue unreachable");
  double E = -std::log1p(u * std::expm1(-room));
  if (!(E > 0.0)) E = std::numeric_limits<double>::denorm_min();
  while (lindley_forward(U_prev, E, a) > 0.0) E = std::nextafter(E, 0.0);
  return E;
}

Anchor parse_anchor(const std::string& s) {
  if (s == "time_stationary") return Anchor::time_stationary;
  if (s == "move_time") return Anchor::move_time;
  throw InvalidArgument(fmt::format("unknown anchor '{}'", s));
}

std::string to_string(Anchor a) {
  return a == Anchor::time_stationary ? "time_stationary" : "move_time";
}

// -----------------------------------------------------------------------------

namespace {

// Replays recorded uniforms; running past the end means the ledger and the
// code disagree about how many draws a step consumed.
class Replay {
 public:
  explicit Replay(const std::vector<double>& v) : v_(&v) {}
  double operator()() {
    if (i_ >= v_->size()) throw LedgerConflict("ledger replay ran out of recorded draws");
    return (*v_)[i_++];
  }

 private:
  const std::vector<double>* v_;
  std::size_t i_ = 0;
};

}  // namespace

EmbeddedPath::EmbeddedPath(QueueParams q, TamingParams t, Anchor anchor, RandomnessLedger& ledger)
    : q_(q), t_(t), anchor_(anchor), ledger_(&ledger) {
  const bool replay = !ledger.empty();
  if (!replay) ledger.open(0);
  const LedgerRecord& rec0 = ledger.at(0);

  PathEntry e;
  e.move_index = 0;
  auto draw_anchor = [&](auto&& src) {
    if (anchor_ == Anchor::time_stationary) {
      e.U = detail::on_grid(length_biased_sample(q_, t_, src));
      e.D = q_.h_star * std::exp(e.U);
      e.gap = taming_F(e.D, t_);
      const double v = src();
      const long age = std::min<long>(static_cast<long>(v * static_cast<double>(e.gap)), e.gap - 1);
      e.sigma_time = -age;
    } else {
      e.U = detail::on_grid(stationary_sample(q_, src()));
      e.D = q_.h_star * std::exp(e.U);
      e.gap = taming_F(e.D, t_);
      e.sigma_time = 0;
    }
  };
  if (replay) {
    Replay src(rec0.anchor);
    draw_anchor(src);
  } else {
    auto src = ledger.recorder(0, Slot::anchor);
    draw_anchor(src);
    ledger.seal(0);
  }
  // The step out of move 0 lies in the future; any Exp(1) draw is consistent.
  e.E = -std::log(rec0.innovation);
  entries_.push_back(e);
  if (replay) extend_to(ledger.min_index());
}

const PathEntry& EmbeddedPath::at(std::int64_t j) const {
  if (j > 0 || j < min_index()) throw InvalidArgument(fmt::format("path has no move index {}", j));
  return entries_[static_cast<std::size_t>(-j)];
}

void EmbeddedPath::extend_to(std::int64_t target) {
  if (target > 0) throw InvalidArgument("move indices are nonpositive");
  while (min_index() > target) {
    const std::int64_t j = min_index() - 1;
    const PathEntry& next = entries_.back();
    PathEntry e;
    e.move_index = j;
    if (ledger_->has(j)) {
      const LedgerRecord& rec = ledger_->at(j);
      Replay src(rec.reverse);
      e.U = detail::on_grid(reversed_step(next.U, q_, src));
      e.E = reconstruct_innovation(e.U, next.U, q_.a, rec.innovation);
    } else {
      const LedgerRecord& rec = ledger_->open(j);
      auto src = ledger_->recorder(j, Slot::reverse);
      e.U = detail::on_grid(reversed_step(next.U, q_, src));
      e.E = reconstruct_innovation(e.U, next.U, q_.a, rec.innovation);
      ledger_->seal(j);
    }
    e.D = q_.h_star * std::exp(e.U);
    e.gap = taming_F(e.D, t_);
    e.sigma_time = next.sigma_time - e.gap;
    entries_.push_back(e);
  }
}

std::vector<PathEntry> EmbeddedPath::entries() const {
  return {entries_.rbegin(), entries_.rend()};
}

void extend_grid_backward(EmbeddedPath& path, std::int64_t target_move_index) {
  path.extend_to(target_move_index);
}

void write_trace_csv(std::ostream& out, const std::vector<PathEntry>& entries) {
  out << "move_index,sigma_time,U,D,E,gap\n";
  for (const auto& e : entries)
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{}\n", e.move_index, e.sigma_time, e.U, e.D, e.E,
                       e.gap);
}

}  // namespace dcftp
