#include "dcftp/ledger.hpp"

#include "dcftp/error.hpp"

#include <fmt/format.h>

namespace dcftp {

namespace {
double slot_uniform(std::uint64_t seed, std::int64_t j, Slot s) {
  return slot_stream(seed, j, static_cast<std::uint64_t>(s)).uniform();
}
}  // namespace

const LedgerRecord& RandomnessLedger::at(std::int64_t j) const {
  if (!has(j)) throw InvalidArgument(fmt::format("ledger has no record for move index {}", j));
  return records_[static_cast<std::size_t>(-j)];
}

LedgerRecord& RandomnessLedger::mutable_at(std::int64_t j) {
  if (!has(j)) throw InvalidArgument(fmt::format("ledger has no record for move index {}", j));
  return records_[static_cast<std::size_t>(-j)];
}

LedgerRecord& RandomnessLedger::open(std::int64_t j) {
  const std::int64_t expected = records_.empty() ? 0 : min_index() - 1;
  if (j != expected)
    throw LedgerConflict(fmt::format("ledger slot {} cannot be written (next writable index is {})", j, expected));
  LedgerRecord& r = records_.emplace_back();
  r.index = j;
  r.innovation = slot_uniform(seed_, j, Slot::innovation);
  r.regen = slot_uniform(seed_, j, Slot::regen);
  r.nu = slot_uniform(seed_, j, Slot::nu);
  if (j == 0) r.tail = slot_uniform(seed_, j, Slot::tail);
  return r;
}

RandomnessLedger::Recorder RandomnessLedger::recorder(std::int64_t j, Slot slot) {
  LedgerRecord& r = mutable_at(j);
  if (r.sealed) throw LedgerConflict(fmt::format("ledger record {} is sealed", j));
  std::vector<double>* sink = nullptr;
  switch (slot) {
    case Slot::reverse: sink = &r.reverse; break;
    case Slot::anchor: sink = &r.anchor; break;
    default: throw InvalidArgument("slot is not variable-length");
  }
  if (!sink->empty()) throw LedgerConflict(fmt::format("ledger slot already written at index {}", j));
  return Recorder(slot_stream(seed_, j, static_cast<std::uint64_t>(slot)), sink, &r.sealed);
}

double RandomnessLedger::Recorder::operator()() {
  if (*sealed_) throw LedgerConflict("draw from a sealed ledger record");
  const double u = gen_.uniform();
  sink_->push_back(u);
  return u;
}

void RandomnessLedger::seal(std::int64_t j) { mutable_at(j).sealed = true; }

}  // namespace dcftp
