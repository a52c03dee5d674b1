#include "doctest.h"

#include "dcftp/error.hpp"
#include "dcftp/ledger.hpp"
#include "dcftp/rng.hpp"

#include <set>

using namespace dcftp;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs of the reference SplitMix64 generator seeded with 0.
  std::uint64_t state = 0;
  auto next = [&] {
    const std::uint64_t out = splitmix64(state);
    state += 0x9e3779b97f4a7c15ULL;
    return out;
  };
  CHECK(next() == 0xe220a8397b1dcdafULL);
  CHECK(next() == 0x6e789e6aa1b965f4ULL);
  CHECK(next() == 0x06c45d188009454fULL);
}

TEST_CASE("xoshiro256++ uniforms stay inside (0,1)") {
  Xoshiro256pp g(42);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("stream keys separate seed, index and slot") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL})
    for (std::int64_t j = -50; j <= 0; ++j)
      for (std::uint64_t slot = 1; slot <= 6; ++slot) keys.insert(stream_key(seed, j, slot));
  CHECK(keys.size() == 3u * 51u * 6u);
  CHECK(replica_seed(7, 0) != replica_seed(7, 1));
  CHECK(replica_seed(7, 1) != replica_seed(8, 0) + 1);
}

TEST_CASE("ledger is write-once and only grows into the past") {
  RandomnessLedger L(99);
  CHECK_THROWS_AS(L.open(-1), LedgerConflict);
  L.open(0);
  CHECK_THROWS_AS(L.open(0), LedgerConflict);
  CHECK_THROWS_AS(L.open(-2), LedgerConflict);
  L.open(-1);
  CHECK(L.min_index() == -1);
  auto rec = L.recorder(-1, Slot::reverse);
  const double u = rec();
  CHECK(L.at(-1).reverse.size() == 1);
  CHECK(L.at(-1).reverse[0] == u);
  CHECK_THROWS_AS(L.recorder(-1, Slot::reverse), LedgerConflict);  // already written
  auto more = L.recorder(-1, Slot::anchor);
  more();
  L.seal(-1);
  CHECK_THROWS_AS(more(), LedgerConflict);
  CHECK_THROWS_AS(L.recorder(-1, Slot::anchor), LedgerConflict);
  CHECK_THROWS_AS(L.at(-5), InvalidArgument);
}

TEST_CASE("ledger values depend only on (seed, index, slot)") {
  RandomnessLedger a(5), b(5);
  for (std::int64_t j = 0; j >= -20; --j) a.open(j);
  for (std::int64_t j = 0; j >= -10; --j) b.open(j);
  for (std::int64_t j = -11; j >= -20; --j) b.open(j);
  for (std::int64_t j = 0; j >= -20; --j) {
    CHECK(a.at(j).regen == b.at(j).regen);
    CHECK(a.at(j).nu == b.at(j).nu);
    CHECK(a.at(j).innovation == b.at(j).innovation);
  }
  CHECK(a.at(0).tail != 0.0);
  CHECK(a.at(-1).tail == 0.0);
  RandomnessLedger c(6);
  c.open(0);
  CHECK(c.at(0).regen != a.at(0).regen);
}
