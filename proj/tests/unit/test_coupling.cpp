#include "doctest.h"

#include "../support/oracles.hpp"

#include "dcftp/chain.hpp"
#include "dcftp/coupling.hpp"
#include "dcftp/error.hpp"
#include "dcftp/rng.hpp"
#include "dcftp/stats.hpp"

#include <cmath>

using namespace dcftp;

namespace {

DriftCertificate regen_certificate(const ChainSpec& c) {
  CertifyOptions o;
  o.d_prime = 6;
  o.delta = 0.1;
  o.eps_cap = 0.1;
  auto res = certify_chain(c, o);
  REQUIRE(res.certificate);
  return *res.certificate;
}

ChiSquareResult row_test(const std::vector<long>& counts, const Vector& row) {
  return chi_square_test(counts, std::vector<double>(row.data(), row.data() + row.size()));
}

}  // namespace

TEST_CASE("quantile block update endpoints and contracts") {
  const ChainSpec c = build_regen_chain(31, 0.2, 1).chain;
  const DriftCertificate cert = regen_certificate(c);
  KernelPowers kp(c);
  BlockUpdate blk;
  blk.z = cert.h_star;
  blk.k = taming_F(blk.z, cert.taming);
  const Vector row = kp.row(blk.k, 3);
  State vmin = -1, vmax = -1;
  for (State y : c.v_order())
    if (row[y] > 0) {
      if (vmin < 0) vmin = y;
      vmax = y;
    }
  blk.u = 1 - 1e-15;
  CHECK(quantile_block_update(3, blk, cert.taming, kp) == vmin);
  blk.u = 1e-300;
  CHECK(quantile_block_update(3, blk, cert.taming, kp) == vmax);

  blk.u = 0.5;
  const State high = c.n() - 1;
  CHECK_THROWS_AS(quantile_block_update(high, blk, cert.taming, kp), ContractViolation);
  CHECK_NOTHROW(quantile_block_update(high, blk, cert.taming, kp, false));
  blk.k += 1;
  CHECK_THROWS_AS(quantile_block_update(3, blk, cert.taming, kp), ContractViolation);
}

TEST_CASE("quantile block update preserves the marginal") {
  const ChainSpec c = build_regen_chain(31, 0.2, 1).chain;
  const DriftCertificate cert = regen_certificate(c);
  KernelPowers kp(c);
  Xoshiro256pp g(17);
  BlockUpdate blk;
  blk.z = 2 * cert.h_star;
  blk.k = taming_F(blk.z, cert.taming);
  for (State x : {0, 4, 8}) {
    std::vector<long> counts(c.n(), 0);
    for (int r = 0; r < 100000; ++r) {
      blk.u = g.uniform();
      ++counts[quantile_block_update(x, blk, cert.taming, kp)];
    }
    CAPTURE(x);
    CHECK(row_test(counts, oracle::naive_power(c.P, blk.k).row(x).transpose()).p_value > 0.001);
  }
}

TEST_CASE("domination holds at every quantile breakpoint") {
  const ChainSpec c = build_regen_chain(31, 0.2, 1).chain;
  const DriftCertificate cert = regen_certificate(c);
  const QueueParams q = QueueParams::from_certificate(cert);
  KernelPowers kp(c);
  for (double z : {cert.h_star, 2 * cert.h_star}) {
    const auto res = oracle::exhaustive_domination(c, cert.taming, z, q.a, kp);
    CAPTURE(z);
    CHECK(res.checked > 0);
    CHECK(res.violations == 0);
  }
}

TEST_CASE("minorization on the three-state kernel") {
  const ChainSpec c = build_three_state();
  KernelPowers kp(c);
  const MinorizationCert m = compute_minorization(kp, {0, 1}, 1, 1.0);
  CHECK(m.eps == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(m.nu[0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(m.nu[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(m.nu[2] == 0.0);
  CHECK_NOTHROW(m.validate(kp, 1.0));
  CHECK_THROWS_AS(m.validate(kp, 0.5), CertificateError);
  CHECK(m.serialize().find("support_size=2") != std::string::npos);

  const MinorizationCert capped = compute_minorization(kp, {0, 1}, 1, 0.3);
  CHECK(capped.eps <= 0.3);
  CHECK(capped.eps == doctest::Approx(0.3).epsilon(1e-13));

  // Row (.5, .5, 0) restricted to {0}: raw mass .5, capped.
  const MinorizationCert single = compute_minorization(kp, {0}, 1, 0.4);
  CHECK(single.raw_mass == 0.5);
  CHECK(single.eps == doctest::Approx(0.4).epsilon(1e-13));
  CHECK(single.nu[0] == 1.0);

  CHECK(find_small_order(kp, {0, 1}, 4) == 1);
}

TEST_CASE("minorization failures") {
  const ChainSpec id = make_chain(Matrix::Identity(3, 3), {1, 2, 3}, "id");
  KernelPowers kp(id);
  CHECK_THROWS_WITH_AS(compute_minorization(kp, {0, 1}, 1, 1.0), "C* is not m-small for this m", CertificateError);
  CHECK_THROWS_WITH_AS(find_small_order(kp, {0, 1, 2}, 3), "no small-set order <= 3", CertificateError);

  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  const ChainSpec cycle = make_chain(flip, {1, 2}, "cycle");
  KernelPowers kc(cycle);
  CHECK_THROWS_AS(find_small_order(kc, {0, 1}, 1), CertificateError);

  Matrix full = Matrix::Constant(3, 3, 1.0 / 3);
  const ChainSpec pos = make_chain(full, {1, 2, 3}, "full");
  KernelPowers kf(pos);
  CHECK(find_small_order(kf, {0, 1, 2}, 5) == 1);
}

TEST_CASE("regen chain minorization is exact") {
  const RegenChain rc = build_regen_chain(31, 0.2, 1);
  const DriftCertificate cert = regen_certificate(rc.chain);
  KernelPowers kp(rc.chain);
  const StateSet cs = c_star(rc.chain, cert.h_star);
  const int m = find_small_order(kp, cs, 16);
  CHECK(m == rc.m);
  const MinorizationCert mc = compute_minorization(kp, cs, m, cert.eps_cap);
  CHECK(mc.eps > 0.0);
  const Matrix& Pm = kp.power(m);
  for (State x : cs)
    for (int y = 0; y < rc.chain.n(); ++y) CHECK(Pm(x, y) >= mc.eps * mc.nu[y]);

  const long k = taming_F(cert.h_star, cert.taming);
  SplitKernel split(kp, mc, k);
  const Eigen::MatrixXd Pk = oracle::naive_power(rc.chain.P, k);
  for (State x : cs) {
    const Vector rec = split.reconstructed_row(x);
    for (int y = 0; y < rc.chain.n(); ++y) CHECK(std::fabs(rec[y] - Pk(x, y)) < 1e-12);
  }
}

TEST_CASE("regenerative block update") {
  const RegenChain rc = build_regen_chain(31, 0.2, 1);
  const ChainSpec& c = rc.chain;
  const DriftCertificate cert = regen_certificate(c);
  KernelPowers kp(c);
  const StateSet cs = c_star(c, cert.h_star);
  const MinorizationCert mc = compute_minorization(kp, cs, 1, cert.eps_cap);
  const long k = taming_F(cert.h_star, cert.taming);
  SplitKernel split(kp, mc, k);
  Xoshiro256pp g(4);

  auto floor_block = [&] {
    BlockUpdate blk;
    blk.z = cert.h_star;
    blk.k = k;
    blk.u = g.uniform();
    blk.E = -std::log(blk.u);
    blk.regen = RegenDraws{g.uniform(), g.uniform()};
    return blk;
  };

  SUBCASE("coalescence frequency matches eps") {
    const int n = 10000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const RegenOutcome r = regenerative_block_update(cs, floor_block(), mc, c, kp, split);
      if (r.coalesced) {
        ++hits;
        CHECK(r.states.size() == 1);
      }
    }
    CHECK(std::fabs(hits - n * mc.eps) <= 3 * std::sqrt(n * mc.eps * (1 - mc.eps)));
  }

  SUBCASE("per-state marginal is the block kernel") {
    for (State x : {cs.front(), cs.back()}) {
      std::vector<long> counts(c.n(), 0);
      for (int i = 0; i < 100000; ++i) ++counts[regenerative_block_update({x}, floor_block(), mc, c, kp, split).states[0]];
      CAPTURE(x);
      CHECK(row_test(counts, oracle::naive_power(c.P, k).row(x).transpose()).p_value > 0.001);
    }
  }

  SUBCASE("contracts") {
    CHECK_THROWS_AS(regenerative_block_update({c.n() - 1}, floor_block(), mc, c, kp, split), ContractViolation);
    BlockUpdate blk = floor_block();
    blk.regen.reset();
    CHECK_THROWS_AS(regenerative_block_update(cs, blk, mc, c, kp, split), InvalidArgument);
  }

  SUBCASE("eps = 1 always coalesces") {
    Matrix P = Matrix::Constant(3, 3, 1.0 / 3);
    const ChainSpec full = make_chain(P, {1, 2, 3}, "full");
    KernelPowers kf(full);
    const MinorizationCert m1 = compute_minorization(kf, {0, 1, 2}, 1, 1.0);
    CHECK(m1.eps == doctest::Approx(1.0));
    SplitKernel s1(kf, m1, 2);
    for (int i = 0; i < 100; ++i) {
      BlockUpdate blk;
      blk.z = 3;
      blk.k = 2;
      blk.u = g.uniform();
      blk.regen = RegenDraws{g.uniform() * m1.eps * 0.999, g.uniform()};
      CHECK(regenerative_block_update({0, 1, 2}, blk, m1, full, kf, s1).coalesced);
    }
  }
}

TEST_CASE("reachability gate") {
  const RegenChain rc = build_regen_chain(31, 0.2, 1);
  const DriftCertificate cert = regen_certificate(rc.chain);
  KernelPowers kp(rc.chain);
  const MinorizationCert mc = compute_minorization(kp, c_star(rc.chain, cert.h_star), 1, cert.eps_cap);
  CHECK(regeneration_stays_low(rc.chain, mc, 0));
  CHECK(regeneration_stays_low(rc.chain, mc, 2));
  CHECK_FALSE(regeneration_stays_low(rc.chain, mc, 1000));
}

TEST_CASE("sigma* offsets") {
  CHECK(sigma_star_offset({1, 1, 5}, 2) == 2);
  CHECK(sigma_star_offset({1, 3}, 2) == 4);
  CHECK(sigma_star_offset({5}, 2) == std::nullopt);
  CHECK(sigma_star_offset({5, 1}, 2) == 6);
  CHECK(sigma_star_offset({1, 1, 1}, 5) == std::nullopt);
}

TEST_CASE("sigma* span on a path") {
  const QueueParams q = QueueParams::make(3.0, 30.0);
  const TamingParams t{1, 0.1, 30};
  RandomnessLedger L(3);
  EmbeddedPath p(q, t, Anchor::move_time, L);
  p.extend_to(-40);
  for (std::int64_t j = -40; j <= -2; ++j) {
    const auto span = sigma_star_span(p, j, 2);
    REQUIRE(span);
    std::vector<long> gaps;
    for (std::int64_t i = j; i < 0; ++i) gaps.push_back(p.at(i).gap);
    CHECK(span->length == *sigma_star_offset(gaps, 2));
    CHECK(span->sigma_star == p.at(span->end_index).sigma_time);
    CHECK(span->spanned.front() == j);
    CHECK(span->spanned.back() == span->end_index - 1);
  }
  CHECK_FALSE(sigma_star_span(p, 0, 2));
  CHECK_THROWS_AS(sigma_star_span(p, -41, 2), InvalidArgument);
}
