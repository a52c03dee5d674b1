#include "doctest.h"

#include "dcftp/drift.hpp"
#include "dcftp/error.hpp"
#include "dcftp/queue.hpp"
#include "dcftp/rng.hpp"
#include "dcftp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace dcftp;

namespace {

// Plain bisection on g(s) = s - exp(-a(1-s)) over (0, 1 - small).
double bisect_sigma(double a) {
  double lo = 1e-300, hi = 1.0 - 1e-9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - std::exp(-a * (1 - mid)) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("sigma root") {
  CHECK(sigma_root(std::log(5.0)) == doctest::Approx(bisect_sigma(std::log(5.0))).epsilon(1e-9));
  CHECK(std::fabs(sigma_root(std::log(5.0)) - 0.3530) < 1e-4);
  CHECK(std::fabs(sigma_root(2.0) - 0.20319) < 1e-5);
  CHECK_THROWS_WITH_AS(sigma_root(1.0), "unstable queue: requires beta* < e^-1", InvalidArgument);
  CHECK_THROWS_AS(sigma_root(0.5), InvalidArgument);
  for (double a : {1.01, 1.3, 3.0, 10.0, 40.0}) {
    const double s = sigma_root(a);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(std::fabs(s - std::exp(-a * (1 - s))) < 1e-9);
  }
}

TEST_CASE("stationary inverse cdf") {
  const QueueParams q = QueueParams::make(std::log(5.0), 1.0);
  CHECK(stationary_sample(q, 0.5) == 0.0);
  CHECK(stationary_sample(q, 1 - q.sigma) == 0.0);
  CHECK(stationary_sample(q, 0.9) == doctest::Approx(-std::log(0.1 / q.sigma) / (1 - q.sigma)).epsilon(1e-12));
  CHECK(std::fabs(stationary_sample(q, 0.9) - 1.9497) < 1e-3);
  CHECK(stationary_sample(q, 1 - 1e-15) > 40.0);
  double prev = 0;
  for (int i = 1; i < 1000; ++i) {
    const double u = i / 1000.0;
    const double x = stationary_sample(q, u);
    CHECK(x >= prev);
    if (x > 0) CHECK(stationary_cdf(q, x) == doctest::Approx(u).epsilon(1e-12));
    prev = x;
  }
}

TEST_CASE("lindley and innovation reconstruction") {
  const double a = std::log(5.0);
  CHECK(lindley_forward(0.5, 2.0, 1.60944) == doctest::Approx(0.89056).epsilon(1e-12));
  CHECK(lindley_forward(0.5, 0.5, 1.60944) == 0.0);
  CHECK(lindley_forward(0.0, a, a) == 0.0);

  CHECK(reconstruct_innovation(0.5, 0.5 + 2.0 - a, a, 0.3) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(reconstruct_innovation(0.5, 0.0, a, 1.0) == doctest::Approx(a - 0.5).epsilon(1e-12));
  CHECK(std::fabs(reconstruct_innovation(0.5, 0.0, a, 1.0) - 1.10944) < 1e-5);
  CHECK_THROWS_AS(reconstruct_innovation(3.0, 0.5, a, 0.5), InvalidArgument);  // would need E <= 0

  Xoshiro256pp g(77);
  for (int i = 0; i < 10000; ++i) {
    const double prev = g.uniform() < 0.5 ? 0.0 : 3 * g.uniform();
    const double next = lindley_forward(prev, -std::log(g.uniform()), a);
    const double E = reconstruct_innovation(prev, next, a, g.uniform());
    CHECK(E > 0.0);
    CHECK(lindley_forward(prev, E, a) == next);
  }
}

TEST_CASE("reversed kernel atom") {
  const QueueParams q = QueueParams::make(std::log(5.0), 1.0);
  CHECK(reversed_atom_probability(0.89056, q) == doctest::Approx(std::exp(-q.sigma * (0.89056 + q.a))).epsilon(1e-12));
  CHECK(std::fabs(reversed_atom_probability(0.89056, q) - 0.4138) < 1e-3);
  CHECK(reversed_atom_probability(100.0, q) < 1e-15);
  double prev = 1;
  for (int i = 1; i < 100; ++i) {
    const double p = reversed_atom_probability(0.1 * i, q);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("forward chain matches the closed-form stationary law") {
  const QueueParams q = QueueParams::make(std::log(5.0), 1.0);
  Xoshiro256pp g(123);
  double U = 0;
  for (int i = 0; i < 10000; ++i) U = lindley_forward(U, -std::log(g.uniform()), q.a);
  long atoms = 0;
  std::vector<double> positive;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    U = lindley_forward(U, -std::log(g.uniform()), q.a);
    if (U == 0) ++atoms;
    else positive.push_back(U);
  }
  CHECK(std::fabs(static_cast<double>(atoms) / n - (1 - q.sigma)) < 0.01);
  const double rate = 1 - q.sigma;
  // The forward chain is autocorrelated; thin before the KS test.
  std::vector<double> thin;
  for (std::size_t i = 0; i < positive.size(); i += 5) thin.push_back(positive[i]);
  const KsResult ks = ks_one_sample(thin, [&](double x) { return -std::expm1(-rate * x); });
  CHECK(ks.p_value > 0.001);
}

TEST_CASE("reversed pairs match forward stationary pairs") {
  const QueueParams q = QueueParams::make(std::log(5.0), 1.0);
  Xoshiro256pp g(9);
  const int n = 50000;
  std::vector<double> fp, fn, fd, rp, rn, rd;
  for (int i = 0; i < n; ++i) {
    const double prev = stationary_sample(q, g.uniform());
    const double next = lindley_forward(prev, -std::log(g.uniform()), q.a);
    fp.push_back(prev);
    fn.push_back(next);
    fd.push_back(next - prev);
  }
  for (int i = 0; i < n; ++i) {
    const double next = stationary_sample(q, g.uniform());
    const double prev = reversed_step(next, q, [&] { return g.uniform(); });
    rp.push_back(prev);
    rn.push_back(next);
    rd.push_back(next - prev);
  }
  CHECK(ks_two_sample(fp, rp).p_value > 0.001);
  CHECK(ks_two_sample(fn, rn).p_value > 0.001);
  CHECK(ks_two_sample(fd, rd).p_value > 0.001);
  CHECK(std::count(rp.begin(), rp.end(), 0.0) == doctest::Approx(n * (1 - q.sigma)).epsilon(0.03));
}

TEST_CASE("stable whenever the rate condition holds") {
  Xoshiro256pp g(5);
  for (int i = 0; i < 1000; ++i) {
    const double delta = 0.01 + 0.98 * g.uniform();
    const double bs = rate_bound(delta) * (0.001 + 0.998 * g.uniform());
    const double a = std::log(1 / bs);
    REQUIRE(a > 1.0);
    CHECK(sigma_root(a) < 1 - delta);
  }
}

TEST_CASE("length-biased anchor") {
  const QueueParams q = QueueParams::make(std::log(5.0), 4.0);
  const TamingParams t{1, 0.3, 2};
  Xoshiro256pp g(31);
  // E_lb[exp(-U)] = E[F exp(-U)] / E[F] under the embedded law, by quadrature.
  auto F = [&](double u) { return static_cast<double>(taming_F(q.h_star * std::exp(u), t)); };
  double num = (1 - q.sigma) * F(0), den = num;
  const double du = 1e-4;
  for (double u = 0.5 * du; u < 120; u += du) {
    const double w = q.sigma * (1 - q.sigma) * std::exp(-(1 - q.sigma) * u) * du;
    num += w * F(u) * std::exp(-u);
    den += w * F(u);
  }
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += std::exp(-length_biased_sample(q, t, [&] { return g.uniform(); }));
  CHECK(std::fabs(sum / n - num / den) < 4 * 0.5 / std::sqrt(n));
  CHECK_THROWS_AS(length_biased_sample(q, TamingParams{1, 0.7, 2}, [&] { return g.uniform(); }), InvalidArgument);
}

TEST_CASE("embedded path") {
  const QueueParams q = QueueParams::make(std::log(1 / 0.2), 419.76);
  const TamingParams t{1, 0.5, 1};
  CHECK(taming_F(q.h_star, t) == 21);

  for (Anchor anchor : {Anchor::time_stationary, Anchor::move_time}) {
    CAPTURE(to_string(anchor));
    RandomnessLedger L(8);
    EmbeddedPath p(q, t, anchor, L);
    p.extend_to(-50);
    CHECK(p.min_index() == -50);
    const auto first = p.entries();
    for (std::int64_t j = -50; j <= 0; ++j) {
      const PathEntry& e = p.at(j);
      CHECK(e.U >= 0.0);
      CHECK(e.D >= q.h_star);
      CHECK(e.D == q.h_star * std::exp(e.U));
      CHECK(e.gap == taming_F(e.D, t));
      CHECK(e.gap >= 1);
      if (j < 0) {
        CHECK(p.at(j + 1).sigma_time - e.sigma_time == e.gap);
        CHECK(lindley_forward(e.U, e.E, q.a) == p.at(j + 1).U);
      }
    }
    if (anchor == Anchor::move_time) CHECK(p.at(0).sigma_time == 0);
    else CHECK((p.age() >= 0 && p.age() < p.at(0).gap));

    p.extend_to(-50);
    p.extend_to(-100);
    for (std::size_t i = 0; i < first.size(); ++i) {
      const PathEntry& e = p.at(first[i].move_index);
      CHECK(e.U == first[i].U);
      CHECK(e.E == first[i].E);
      CHECK(e.sigma_time == first[i].sigma_time);
    }

    RandomnessLedger L2(8);
    EmbeddedPath p2(q, t, anchor, L2);
    for (int k = -1; k >= -100; --k) extend_grid_backward(p2, k);
    for (std::int64_t j = -100; j <= 0; ++j) CHECK(p2.at(j).U == p.at(j).U);
  }
  CHECK_THROWS_AS(parse_anchor("somewhere"), InvalidArgument);
  CHECK(parse_anchor("move_time") == Anchor::move_time);
}

TEST_CASE("trace csv") {
  const QueueParams q = QueueParams::make(2.0, 3.0);
  RandomnessLedger L(1);
  EmbeddedPath p(q, {1, 0.5, 1}, Anchor::move_time, L);
  p.extend_to(-3);
  std::ostringstream os;
  write_trace_csv(os, p.entries());
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "move_index,sigma_time,U,D,E,gap");
  std::getline(is, line);
  CHECK(line.rfind("-3,", 0) == 0);
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4);
}
