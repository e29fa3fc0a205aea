#pragma once

// Induced Markov structure on the base Lambda = [1/2, 1].
//
// For both map families the first-return partition of Lambda is Markov:
// {R = 1} = [3/4, 1], and for n >= 2 the cell {R = n} is the interval of
// points whose image y = 2x - 1 lies in [z_{n-1}, z_{n-2}), where z_0 = 1/2
// and z_k is the preimage of 1/2 under the left branches of omega_k, ...,
// omega_1. Each cell is mapped by f^R onto Lambda, so first returns and
// Markov returns agree; both are exposed behind ReturnMode.
//
// Work near the branch point is done in the image coordinate y = 2x - 1,
// which resolves cells far below the spacing of doubles near 1/2.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quenched/family.hpp"
#include "quenched/numeric.hpp"
#include "quenched/omega.hpp"

namespace quenched::tower {

inline constexpr std::int64_t kDefaultCap = 1'000'000;

enum class ReturnMode { first, markov };

struct ReturnRecord {
  double x = 0.0;
  std::int64_t R = 0;  // valid when !capped
  bool capped = false;
  ReturnMode mode = ReturnMode::first;
  double image = 0.0;     // f^R_omega(x) when !capped
  std::string itinerary;  // 'L' / 'R' per step, filled on request
};

// Smallest n in [1, cap] with f^n_omega(x) in Lambda. Throws
// std::domain_error when x is outside Lambda.
ReturnRecord return_time(const omega::ParamSequence& seq, double x, std::int64_t cap = kDefaultCap,
                         ReturnMode mode = ReturnMode::first, bool record_itinerary = false);

// Smallest n in [1, cap] with f^n_omega(p) in Lambda for any p in [0, 1]
// (equal to return_time for p in Lambda); nullopt when capped.
std::optional<std::int64_t> hit_time(const omega::ParamSequence& seq, double p, std::int64_t cap = kDefaultCap);

struct NthReturn {
  std::int64_t value = 0;  // R^n when !capped
  double point = 0.0;      // f^{R^n}(x)
  bool capped = false;
};

// R^0 = 0, R^n = R^{n-1} + R_{sigma^{R^{n-1}} omega}(f^{R^{n-1}} x). The cap
// applies to each single return.
NthReturn nth_return(const omega::ParamSequence& seq, double x, int n, std::int64_t cap = kDefaultCap);

struct Cell {
  double lo = 0.0;  // interval [lo, hi) in x
  double hi = 0.0;
  double y_lo = 0.0;  // same interval in y = 2x - 1 (exact for deep cells)
  double y_hi = 0.0;
  std::int64_t R = 0;
  double mass = 0.0;  // normalized Lebesgue mass within Lambda
  bool markov_ok = false;
  double image_lo = 0.0;  // f^R at the left end (one-sided limits)
  double image_hi = 0.0;
};

struct ReturnPartition {
  omega::ParamSequence omega;
  std::vector<Cell> cells;  // ordered by R
  std::int64_t depth_cap = 0;
  double refine_tol = 0.0;
  double residual = 0.0;  // normalized mass of {R > resolved depth} plus merged cells
};

// Thresholds z_0..z_k in the y coordinate (see header comment).
std::vector<double> return_thresholds(const omega::ParamSequence& seq, std::int64_t k);

ReturnPartition build_partition(const omega::ParamSequence& seq, std::int64_t depth_cap, double refine_tol = 1e-12);

// Index of the cell containing x, nullopt when x falls in the residual.
std::optional<std::size_t> locate(const ReturnPartition& partition, double x);

// gcd of the return times of cells with mass > mass_floor. Throws
// std::invalid_argument when no cell clears the floor.
std::int64_t gcd_check(const ReturnPartition& partition, double mass_floor);
std::int64_t gcd_check(std::span<const Cell> cells, double mass_floor);

struct Separation {
  std::optional<std::int64_t> value;  // nullopt = not separated within cap returns
  bool capped = false;                // a return computation hit its cap
};

// Number of common Markov returns before x and y land in different cells.
Separation separation_time(const omega::ParamSequence& seq, double x, double y, std::int64_t cap,
                           std::int64_t return_cap = kDefaultCap);

struct DistortionReport {
  double empirical_cf = 0.0;     // max |J(x)/J(y) - 1| / beta^s over sampled pairs
  double max_deviation = 0.0;    // max |J(x)/J(y) - 1|
  double min_expansion = 0.0;    // min |f^R x - f^R y| / |x - y|
  double beta_hat = 0.0;         // 1 / min_expansion
  std::int64_t pairs = 0;
  std::int64_t violations = 0;   // expansion below 1/beta (1 - rel_tol)
};

// beta is the nominal contraction (1/2 for these families).
DistortionReport distortion_check(const omega::ParamSequence& seq, const ReturnPartition& partition,
                                  std::int64_t pair_samples, std::uint64_t sample_seed, double beta = 0.5,
                                  double rel_tol = 1e-9);

struct TailRow {
  std::int64_t n = 0;
  double estimate = 0.0;
  double std_err = 0.0;
  double n_eff = 0.0;
};

struct TailCurve {
  std::vector<TailRow> rows;  // n = 0..n_max
  numeric::PowerLawFit fit;
  double capped_fraction = 0.0;
  std::vector<std::string> warnings;
};

struct TailOptions {
  double fit_lo = 100.0;
  double fit_hi = 10000.0;
  int threads = 0;  // 0 = numeric::default_threads()
};

// Monte Carlo estimate of E Leb(R_omega > n | Lambda) over omega = seeds.
// Sample points are drawn by defensive importance sampling in the y
// coordinate (half uniform, half log-uniform down to the deepest resolved
// threshold) and weighted back to Lebesgue.
TailCurve tail_curve(Family family, Interval bounds, std::span<const std::uint64_t> seeds, std::int64_t n_max,
                     std::int64_t samples_per_omega, const TailOptions& options = {});

}  // namespace quenched::tower
