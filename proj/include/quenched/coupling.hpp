#pragma once

// Matching scheme for pairs of orbits: alternating l0-fold returns tau_i and
// simultaneous base visits T_n, simulated on the phase space.
//
// "l0-fold return" of a point p at time t means the l0-th visit of its orbit
// to Lambda after time t (for p in Lambda this is the l0-th return time).
// Both components are advanced by the same fiber maps; only the component
// whose returns define the next tau alternates (x first, then x', ...).
// After a match the recursion restarts from the x-component.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quenched/family.hpp"
#include "quenched/omega.hpp"
#include "quenched/tower.hpp"

namespace quenched::coupling {

struct L0Row {
  std::int64_t l = 0;
  double epsilon = 0.0;  // fraction of base points with R^k(x) = l for some k
  double std_err = 0.0;
};

struct L0Estimate {
  std::vector<L0Row> rows;  // l = 0..l_max
  std::optional<std::int64_t> suggested_l0;
  std::vector<std::string> warnings;
};

L0Estimate estimate_l0(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t l_max,
                       std::int64_t samples, int threads = 0);

enum class Component : std::uint8_t { x = 0, x_prime = 1 };

struct CouplingTrace {
  double x = 0.0;
  double x_prime = 0.0;
  std::int64_t l0 = 0;
  std::vector<std::int64_t> taus;     // tau_0 = 0, then every tau across restarts (absolute times)
  std::vector<Component> movers;      // movers[i] defined tau_{i+1}
  std::vector<double> positions_x;    // orbit of x at each tau
  std::vector<double> positions_xp;   // orbit of x' at each tau
  std::vector<std::int64_t> Ts;       // T_1, T_2, ... (absolute times)
  bool capped = false;                // a return computation hit its cap or an orbit was absorbed at 0
  bool horizon_reached = false;       // stopped at the time horizon before max_matches
};

// Runs the recursion until `max_matches` matches, a capped return, or time
// exceeding `horizon`. Throws std::domain_error when x or x' is outside Lambda.
CouplingTrace match_pair(const omega::ParamSequence& seq, double x, double x_prime, std::int64_t l0,
                         std::int64_t cap = tower::kDefaultCap, std::int64_t max_matches = 1,
                         std::int64_t horizon = std::int64_t{1} << 62);

struct CouplingRow {
  std::int64_t n = 0;
  double estimate = 0.0;  // P(T_{floor(n^alpha)} > n)
  double std_err = 0.0;
  double capped_fraction = 0.0;
};

struct CouplingTail {
  std::vector<CouplingRow> rows;  // n = 1..n_max
  numeric::LineFit log_linear;    // slope of -log(tail) against n
  numeric::PowerLawFit power_law;
  double capped_fraction = 0.0;
  std::vector<std::string> warnings;
};

// Pairs are drawn from Lebesgue x Lebesgue on Lambda x Lambda; pair i uses
// seeds[i % seeds.size()]. Pairs whose returns cap count as T > n.
CouplingTail coupling_tail(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t l0,
                           double alpha_exp, std::int64_t n_max, std::int64_t pair_samples, int threads = 0);

}  // namespace quenched::coupling
