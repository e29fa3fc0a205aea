#pragma once

// Small statistics toolkit shared by the Monte Carlo modules.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace quenched::numeric {

double normal_cdf(double z);

struct MeanSe {
  double mean = 0.0;
  double std_err = 0.0;
};

// Sample mean and standard error of the mean (0 for fewer than 2 values).
MeanSe mean_se(std::span<const double> values);

// Unbiased sample variance (0 for fewer than 2 values).
double sample_variance(std::span<const double> values);

// Linear interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Kolmogorov-Smirnov distance sup |F_n - F| of a sample against a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

// Two-sample KS distance sup |F_a - F_b|.
double ks_distance_two_sample(std::vector<double> a, std::vector<double> b);

// Asymptotic Kolmogorov tail P(K > lambda) with Stephens' small-sample
// correction lambda = (sqrt(n_eff) + 0.12 + 0.11 / sqrt(n_eff)) * distance.
double ks_pvalue(double distance, double n_eff);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct PowerLawFit {
  double exponent = 0.0;  // estimate ~ n^(-exponent)
  double window_lo = 0.0;
  double window_hi = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Fit log(value) = c - exponent * log(n) over n in [lo, hi] with value > 0.
// Points are thinned to a logarithmic grid so each decade weighs the same.
PowerLawFit fit_power_law(std::span<const double> n, std::span<const double> value, double lo, double hi);

// Decay rate of log(value) = c - rate * n over n in [lo, hi], value > 0.
LineFit fit_log_linear(std::span<const double> n, std::span<const double> value, double lo, double hi);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results land in
// index order, so reductions over them are deterministic.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

// Process-wide default worker count used by the ensemble operations.
int default_threads();
void set_default_threads(int threads);

}  // namespace quenched::numeric
