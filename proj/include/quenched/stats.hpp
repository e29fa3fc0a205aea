#pragma once

// Birkhoff-sum ensembles and the statistical checks built on them: variance
// growth, CLT, LIL envelopes, functional CLT path functionals, and the ASIP
// rate calculator.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quenched/maps.hpp"
#include "quenched/omega.hpp"

namespace quenched::stats {

enum class Sampling { equivariant, lebesgue };

// S_k = sum_{j=1..k} phi_{sigma^j omega}(f^j_omega x), with phi fiberwise
// centered against the grid estimate of mu_{sigma^j omega}; S_0 = 0.
struct BirkhoffEnsemble {
  std::uint64_t omega_seed = 0;
  std::int64_t n_steps = 0;
  std::int64_t n_samples = 0;
  Sampling sampling = Sampling::equivariant;
  std::vector<double> S;        // [sample][k], k = 0..n_steps, row-major
  std::vector<double> centers;  // centers[k] = int phi_k dmu_k, k = 0..n_steps

  double at(std::int64_t sample, std::int64_t k) const {
    return S[static_cast<std::size_t>(sample * (n_steps + 1) + k)];
  }
  std::span<const double> path(std::int64_t sample) const {
    return {S.data() + sample * (n_steps + 1), static_cast<std::size_t>(n_steps + 1)};
  }
  std::vector<double> column(std::int64_t k) const;
};

struct EnsembleOptions {
  int n_bins = 1 << 12;
  int depth = 32;
  int subsamples = 64;
  int threads = 0;
  std::uint64_t sample_seed = 0;  // 0 = the sequence's master seed
};

// Doubling orbits are simulated exactly: the point is a 64-bit binary window
// of a Lebesgue-random real whose lower digits are drawn as they shift in,
// so orbits never collapse to 0 the way repeated floating doubling does.
BirkhoffEnsemble birkhoff_ensemble(const omega::ParamSequence& seq, const maps::Observable& phi,
                                   std::int64_t n_steps, std::int64_t n_samples, Sampling sampling,
                                   const EnsembleOptions& options = {});

// Partial sums of i.i.d. N(0, sigma^2) increments, for calibration.
BirkhoffEnsemble synthetic_ensemble(std::uint64_t seed, std::int64_t n_steps, std::int64_t n_samples, double sigma);

struct VarianceRow {
  std::int64_t n = 0;
  double value = 0.0;  // sample variance of S_n, divided by n
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct VarianceOptions {
  int bootstrap = 200;
  double level = 0.99;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> grid;  // empty = powers of two up to n_steps, plus n_steps
};

std::vector<VarianceRow> variance_growth(const BirkhoffEnsemble& ens, const VarianceOptions& options = {});

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::int64_t n = 0;        // time index tested
  std::int64_t samples = 0;
};

// KS distance of S_n / (sigma sqrt n) against the standard normal. Throws
// std::invalid_argument for sigma2 <= 0 (degenerate case: use coboundary_test).
KsResult qclt_test(const BirkhoffEnsemble& ens, double sigma2, std::int64_t n = 0);

struct CalibrationResult {
  int repetitions = 0;
  int rejections = 0;
  double rejection_rate = 0.0;
};

// Repeats qclt_test on synthetic Gaussian ensembles; rejection = p < level.
CalibrationResult qclt_calibration(std::uint64_t seed, int repetitions, std::int64_t n_steps, std::int64_t n_samples,
                                   double level = 0.01);

struct LilResult {
  double c = 1.0;
  std::vector<double> per_sample_max;  // max_{16 <= k <= n} S_k / sqrt(c k log log k)
  std::vector<double> per_sample_min;
  double median_max = 0.0;
  double iqr_max = 0.0;
  double median_min = 0.0;
  double sigma = 0.0;
};

inline constexpr std::int64_t kLilMinN = 16;

LilResult qlil_envelope(const BirkhoffEnsemble& ens, double sigma2, double c);

enum class Functional { sup, sup_abs, terminal };
const char* functional_name(Functional f);
Functional parse_functional(std::string_view name);

// Exact CDF of the functional for standard Brownian motion on [0, 1].
double brownian_cdf(Functional f, double a);

struct BrownianOracle {
  std::int64_t paths = 0;
  std::int64_t steps = 0;
  std::vector<double> sup;
  std::vector<double> sup_abs;
  std::vector<double> terminal;
  const std::vector<double>& values(Functional f) const;
};

// Standard Brownian paths on a uniform grid. The maximum and minimum inside
// each step are drawn from the exact Brownian-bridge laws, so sup and sup_abs
// carry no discretization bias. Results are cached per (paths, steps, seed).
const BrownianOracle& brownian_oracle(std::int64_t paths = 100000, std::int64_t steps = 1024,
                                      std::uint64_t seed = 20240601, int threads = 0);

struct FcltResult {
  Functional functional = Functional::sup;
  std::vector<double> values;  // functional of S^{n,omega} / sigma per sample
  double ks_brownian = 0.0;    // two-sample KS against the Brownian oracle
  double ks_exact = 0.0;       // one-sample KS against brownian_cdf
  double p_value = 0.0;        // for ks_exact
};

// The path S^{n,omega}_t interpolates S_k / sqrt(n) linearly between t = k/n,
// so its sup over [0, 1] is attained at a node.
FcltResult qfclt_paths(const BirkhoffEnsemble& ens, double sigma2, Functional functional,
                       const BrownianOracle& oracle);

struct RateParams {
  double p = std::numeric_limits<double>::infinity();  // in (1, inf]
  double D = 0.0;
  bool exponential = false;  // rho_n = exp(-a n^b)
  double a = 0.0;
  double b = 0.0;
};

struct RateResult {
  double epsilon_1 = 0.0;
  double epsilon_D = 0.0;
  double epsilon_0_lo = 0.0;  // admissible epsilon_0 in (lo, 1/4)
  double epsilon_0_hi = 0.25;
  bool arbitrarily_small = false;
};

// Throws std::invalid_argument naming the violated inequality when the
// parameters are inadmissible.
RateResult asip_rate(const RateParams& params);

}  // namespace quenched::stats
