#include "quenched/omega.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "quenched/rng.hpp"

namespace quenched {

std::string_view family_name(Family family) {
  switch (family) {
    case Family::lsv:
      return "lsv";
    case Family::doubling:
      return "doubling";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lsv") return Family::lsv;
  if (lower == "doubling") return Family::doubling;
  throw std::invalid_argument("unknown map family '" + std::string(name) + "'");
}

}  // namespace quenched

namespace quenched::omega {

void validate_bounds(Family family, Interval bounds) {
  if (!std::isfinite(bounds.lo) || !std::isfinite(bounds.hi))
    throw std::invalid_argument("parameter bounds must be finite");
  if (bounds.lo > bounds.hi)
    throw std::invalid_argument("parameter bounds reversed: alpha_min > alpha_max");
  if (family == Family::lsv && !(bounds.lo > 0.0 && bounds.hi < 1.0))
    throw std::invalid_argument("LSV parameters must satisfy 0 < alpha_min <= alpha_max < 1");
}

ParamSequence::ParamSequence(std::uint64_t master_seed, Family family, Interval bounds)
    : seed_(master_seed), family_(family), bounds_(bounds) {
  validate_bounds(family, bounds);
}

double ParamSequence::raw(std::int64_t absolute) const {
  if (bounds_.lo == bounds_.hi) return bounds_.lo;
  const double u = to_unit(counter_hash(seed_, zigzag(absolute)));
  return std::min(bounds_.hi, bounds_.lo + (bounds_.hi - bounds_.lo) * u);
}

double ParamSequence::param(std::int64_t i) const {
  const std::int64_t absolute = i + offset_;
  if (splice_ && absolute >= splice_->boundary)
    return splice_->tail->param(i + (offset_ - splice_->tail_origin));
  return raw(absolute);
}

std::vector<double> ParamSequence::params(std::int64_t first, std::size_t count) const {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = param(first + static_cast<std::int64_t>(k));
  return out;
}

ParamSequence ParamSequence::shifted(std::int64_t k) const {
  ParamSequence out = *this;
  out.offset_ += k;
  return out;
}

ParamSequence ParamSequence::spliced(const ParamSequence& tail, std::int64_t at) const {
  if (tail.family() != family_)
    throw std::invalid_argument("cannot splice sequences of different families");
  ParamSequence out = *this;
  out.splice_ = std::make_shared<const Splice>(
      Splice{std::make_shared<const ParamSequence>(tail), at + offset_, offset_});
  return out;
}

ParamSequence make_sequence(std::uint64_t master_seed, Family family, Interval bounds) {
  return ParamSequence(master_seed, family, bounds);
}

ParamSequence shift(const ParamSequence& seq, std::int64_t k) { return seq.shifted(k); }

}  // namespace quenched::omega
