#pragma once

#include <string>
#include <string_view>

namespace quenched {

// Fiber-map families available to the driving sequence.
enum class Family { lsv, doubling };

std::string_view family_name(Family family);
// Accepts "lsv" and "doubling" (case-insensitive); throws std::invalid_argument.
Family parse_family(std::string_view name);

// Closed parameter interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Left end of the base Lambda = [1/2, 1] of the induced Markov structure.
inline constexpr double kBaseLeft = 0.5;

inline bool in_base(double x) { return x >= kBaseLeft; }

}  // namespace quenched
