#pragma once

// Two-sided i.i.d. driving sequences omega = (omega_i), i in Z.
//
// param(i) is a pure function of (master seed, i + origin offset): the signed
// index is zig-zag encoded (0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ...) and
// used as the counter of a SplitMix64 stream keyed by the seed. Shifting is
// O(1) and nothing is stored.

#include <cstdint>
#include <memory>
#include <vector>

#include "quenched/family.hpp"

namespace quenched::omega {

constexpr std::uint64_t zigzag(std::int64_t i) {
  return i >= 0 ? 2 * static_cast<std::uint64_t>(i) : 2 * static_cast<std::uint64_t>(-(i + 1)) + 1;
}

class ParamSequence {
 public:
  // Throws std::invalid_argument for lo > hi or bounds outside the family's
  // admissible range (LSV: 0 < lo <= hi < 1; doubling: finite).
  ParamSequence(std::uint64_t master_seed, Family family, Interval bounds);

  double param(std::int64_t i) const;
  // params(first, n)[k] == param(first + k)
  std::vector<double> params(std::int64_t first, std::size_t count) const;

  // shifted(k).param(i) == param(i + k)
  ParamSequence shifted(std::int64_t k) const;

  // Sequence equal to *this at indices < at and to `tail` at indices >= at
  // (both relative to the current origin). Shifts move the splice point.
  // Replaces any earlier splice.
  ParamSequence spliced(const ParamSequence& tail, std::int64_t at) const;

  std::uint64_t master_seed() const { return seed_; }
  Family family() const { return family_; }
  Interval bounds() const { return bounds_; }
  std::int64_t origin_offset() const { return offset_; }

 private:
  struct Splice {
    std::shared_ptr<const ParamSequence> tail;
    std::int64_t boundary = 0;     // absolute index where the tail starts
    std::int64_t tail_origin = 0;  // our offset when the splice was made
  };

  double raw(std::int64_t absolute) const;

  std::uint64_t seed_;
  Family family_;
  Interval bounds_;
  std::int64_t offset_ = 0;
  std::shared_ptr<const Splice> splice_;
};

ParamSequence make_sequence(std::uint64_t master_seed, Family family, Interval bounds);
ParamSequence shift(const ParamSequence& seq, std::int64_t k);

// Family-specific admissibility of a parameter interval.
void validate_bounds(Family family, Interval bounds);

}  // namespace quenched::omega
