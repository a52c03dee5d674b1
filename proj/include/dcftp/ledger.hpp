#pragma once

// Write-once, move-indexed record of every uniform a CFTP run consumes.
// Each slot of each move index has its own xoshiro256++ stream keyed by
// (seed, index, slot), so the values never depend on how far or in what
// order the ledger was extended.

#include "dcftp/rng.hpp"

#include <cstdint>
#include <deque>
#include <vector>

namespace dcftp {

enum class Slot : std::uint64_t {
  reverse = 1,     // reversed_step draws for U_j given U_{j+1}
  innovation = 2,  // truncated-exponential innovation when U_{j+1} = 0
  regen = 3,       // regeneration Bernoulli
  nu = 4,          // draw from the regeneration measure
  anchor = 5,      // index 0 only: anchor workload and age
  tail = 6,        // index 0 only: quantile uniform for the partial pause
};

struct LedgerRecord {
  std::int64_t index = 0;
  std::vector<double> reverse;
  std::vector<double> anchor;
  double innovation = 0.0;
  double regen = 0.0;
  double nu = 0.0;
  double tail = 0.0;
  bool sealed = false;

  bool operator==(const LedgerRecord&) const = default;
};

class RandomnessLedger {
 public:
  explicit RandomnessLedger(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  bool empty() const { return records_.empty(); }
  std::int64_t min_index() const { return 1 - static_cast<std::int64_t>(records_.size()); }
  bool has(std::int64_t j) const { return j <= 0 && j >= min_index() && !records_.empty(); }
  const LedgerRecord& at(std::int64_t j) const;

  /// Opens the record for index j, filling its scalar slots. j must be 0 for
  /// an empty ledger and min_index() - 1 otherwise; anything else would
  /// rewrite history and throws LedgerConflict.
  LedgerRecord& open(std::int64_t j);

  /// Draws for a variable-length slot of an open record, appending each
  /// value it hands out.
  class Recorder {
   public:
    double operator()();

   private:
    friend class RandomnessLedger;
    Recorder(Xoshiro256pp gen, std::vector<double>* sink, const bool* sealed)
        : gen_(gen), sink_(sink), sealed_(sealed) {}
    Xoshiro256pp gen_;
    std::vector<double>* sink_;
    const bool* sealed_;
  };
  Recorder recorder(std::int64_t j, Slot slot);

  void seal(std::int64_t j);

  /// Records from index 0 down to min_index().
  const std::deque<LedgerRecord>& records() const { return records_; }

 private:
  LedgerRecord& mutable_at(std::int64_t j);
  std::uint64_t seed_;
  std::deque<LedgerRecord> records_;  // front is index 0
};

}  // namespace dcftp
