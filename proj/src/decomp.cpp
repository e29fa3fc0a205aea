#include "quenched/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "quenched/numeric.hpp"
#include "quenched/rng.hpp"
#include "quenched/simd.hpp"

namespace quenched::decomp {

namespace {

using transfer::GridDensity;
using transfer::kMaskFloor;

void check_args(int k_trunc, int n_bins, int depth) {
  if (k_trunc < 0) throw std::invalid_argument("K_trunc must be >= 0");
  if (n_bins < 2) throw std::invalid_argument("n_bins must be >= 2");
  if (depth < 0) throw std::invalid_argument("pullback depth must be >= 0");
}

// Fiberwise centered bin averages of phi on every fiber of a window.
std::vector<std::vector<double>> centered_observables(const omega::ParamSequence& seq, const maps::Observable& phi,
                                                      const transfer::DensityWindow& window, int subsamples) {
  std::vector<std::vector<double>> out;
  std::vector<double> shared;
  if (!phi.depends_on_fiber())
    shared = transfer::bin_average(phi, maps::fiber(seq, window.first()), window.n_bins(), subsamples).values;
  for (std::int64_t t = window.first(); t <= window.last(); ++t) {
    std::vector<double> values =
        phi.depends_on_fiber() ? transfer::bin_average(phi, maps::fiber(seq, t), window.n_bins(), subsamples).values
                               : shared;
    const double center = transfer::integrate(values, window.density(t));
    for (double& v : values) v -= center;
    out.push_back(std::move(values));
  }
  return out;
}

std::vector<double> times_density(std::span<const double> values, const GridDensity& h) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i] * h.mass[i];
  return out;
}

std::vector<double> over_density(std::span<const double> masses, const GridDensity& h) {
  std::vector<double> out(masses.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (h.mass[i] >= kMaskFloor) out[i] = masses[i] / h.mass[i];
  return out;
}

double masked_fraction(const GridDensity& h) {
  std::size_t masked = 0;
  for (double m : h.mass)
    if (m < kMaskFloor) ++masked;
  return static_cast<double>(masked) / static_cast<double>(h.mass.size());
}

// Horner evaluation of the truncated series at fiber `target`, as signed
// masses: v <- L_{t-1} v + phi_t h_t for t = target-K .. target.
std::vector<double> series_masses(const transfer::DensityWindow& window, const std::vector<std::vector<double>>& phi,
                                  std::int64_t target, int k_trunc) {
  const auto at = [&](std::int64_t t) -> const std::vector<double>& {
    return phi[static_cast<std::size_t>(t - window.first())];
  };
  std::vector<double> v(static_cast<std::size_t>(window.n_bins()), 0.0);
  std::vector<double> next(v.size());
  for (std::int64_t t = target - k_trunc; t <= target; ++t) {
    if (t > target - k_trunc) {
      transfer::push_masses(window.matrix(t - 1), v, next);
      v.swap(next);
    }
    const GridDensity& h = window.density(t);
    const std::vector<double>& p = at(t);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += p[i] * h.mass[i];
  }
  return v;
}

double last_term_l1(const transfer::DensityWindow& window, const std::vector<std::vector<double>>& phi,
                    std::int64_t target, int k_trunc) {
  const std::int64_t start = target - k_trunc;
  std::vector<double> w = times_density(phi[static_cast<std::size_t>(start - window.first())], window.density(start));
  std::vector<double> next(w.size());
  for (std::int64_t t = start; t < target; ++t) {
    transfer::push_masses(window.matrix(t), w, next);
    w.swap(next);
  }
  return simd::abs_sum(w);
}

CoboundaryG g_from_window(const transfer::DensityWindow& window, const std::vector<std::vector<double>>& phi,
                          std::int64_t target, int k_trunc) {
  CoboundaryG out;
  const GridDensity& h = window.density(target);
  out.g.values = over_density(series_masses(window, phi, target, k_trunc), h);
  out.first_term_l1 = simd::abs_sum(times_density(phi[static_cast<std::size_t>(target - window.first())], h));
  out.last_term_l1 = last_term_l1(window, phi, target, k_trunc);
  out.converged = !(out.last_term_l1 > 0.1 * out.first_term_l1);
  if (!out.converged) out.warnings.push_back("g series not converged: last term exceeds 10% of the first");
  return out;
}

}  // namespace

CoboundaryG coboundary_g(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc, int n_bins,
                         int depth, const Options& options) {
  check_args(k_trunc, n_bins, depth);
  const transfer::DensityWindow window(seq, n_bins, depth, -k_trunc, 0, options.subsamples);
  const auto centered = centered_observables(seq, phi, window, options.subsamples);
  return g_from_window(window, centered, 0, k_trunc);
}

Decomposition martingale_psi(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc, int n_bins,
                             int depth, const Options& options) {
  check_args(k_trunc, n_bins, depth);
  const transfer::DensityWindow window(seq, n_bins, depth, -k_trunc, 1, options.subsamples);
  const auto centered = centered_observables(seq, phi, window, options.subsamples);

  Decomposition d;
  d.k_trunc = k_trunc;
  CoboundaryG g0 = g_from_window(window, centered, 0, k_trunc);
  CoboundaryG g1 = g_from_window(window, centered, 1, k_trunc);
  d.g = std::move(g0.g);
  d.g_next = std::move(g1.g);
  d.truncation_tail = g0.last_term_l1;
  d.warnings = g0.warnings;

  const std::vector<double>& phi0 = centered[static_cast<std::size_t>(-window.first())];
  const std::vector<double>& phi1 = centered[static_cast<std::size_t>(1 - window.first())];
  const GridDensity& h0 = window.density(0);
  const GridDensity& h1 = window.density(1);
  const transfer::TransferMatrix& m0 = window.matrix(0);

  std::vector<double> diff(phi1.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = phi1[i] - d.g_next.values[i];
  const std::vector<double> composed = transfer::koopman(m0, diff);
  d.psi.values.resize(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) d.psi.values[i] = composed[i] + d.g.values[i];

  std::vector<double> pushed(diff.size());
  transfer::push_masses(m0, times_density(d.psi.values, h0), pushed);
  for (std::size_t j = 0; j < pushed.size(); ++j)
    if (h1.mass[j] >= kMaskFloor) d.residual += std::fabs(pushed[j]);

  d.h = h0;
  d.sigma2_fiber = simd::weighted_square_sum(d.psi.values, h0.mass);
  d.phi_l2 = simd::weighted_square_sum(phi0, h0.mass);
  d.masked_fraction = std::max(masked_fraction(h0), masked_fraction(h1));
  for (double v : d.g.values) d.sup_g = std::max(d.sup_g, std::fabs(v));
  return d;
}

DecompositionChain::DecompositionChain(const omega::ParamSequence& seq, const maps::Observable& phi, int k_trunc,
                                       int n_bins, int depth, std::int64_t last, const Options& options)
    : n_bins_(n_bins) {
  check_args(k_trunc, n_bins, depth);
  if (last < 0) throw std::invalid_argument("DecompositionChain: last must be >= 0");
  const transfer::DensityWindow window(seq, n_bins, depth, -k_trunc, last + 1, options.subsamples);
  const auto centered = centered_observables(seq, phi, window, options.subsamples);
  const auto phi_at = [&](std::int64_t t) -> const std::vector<double>& {
    return centered[static_cast<std::size_t>(t - window.first())];
  };

  std::vector<double> v = series_masses(window, centered, 0, k_trunc);
  std::vector<double> next(v.size());
  for (std::int64_t t = 0; t <= last + 1; ++t) {
    if (t > 0) {
      transfer::push_masses(window.matrix(t - 1), v, next);
      v.swap(next);
      const GridDensity& h = window.density(t);
      const std::vector<double>& p = phi_at(t);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += p[i] * h.mass[i];
    }
    g_.push_back(over_density(v, window.density(t)));
    phi_.push_back(phi_at(t));
    h_.push_back(window.density(t));
  }
  for (std::int64_t t = 0; t <= last; ++t) {
    const auto& g_t = g_[static_cast<std::size_t>(t)];
    const auto& g_n = g_[static_cast<std::size_t>(t) + 1];
    const auto& p_n = phi_[static_cast<std::size_t>(t) + 1];
    std::vector<double> diff(g_t.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = p_n[i] - g_n[i];
    std::vector<double> psi = transfer::koopman(window.matrix(t), diff);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += g_t[i];
    psi_.push_back(std::move(psi));
  }
}

double DecompositionChain::lookup(const std::vector<double>& values, double x) {
  return values[static_cast<std::size_t>(transfer::bin_of(x, static_cast<int>(values.size())))];
}

SigmaEstimate sigma_squared(const Ensemble& e) {
  if (e.seeds.empty()) throw std::invalid_argument("sigma_squared: need at least one seed");
  omega::validate_bounds(e.family, e.bounds);
  const int threads = e.options.threads > 0 ? e.options.threads : numeric::default_threads();
  SigmaEstimate out;
  out.per_seed.assign(e.seeds.size(), 0.0);
  out.residuals.assign(e.seeds.size(), 0.0);
  std::vector<double> phi_l2(e.seeds.size(), 0.0);
  numeric::parallel_for(e.seeds.size(), threads, [&](std::size_t s) {
    const omega::ParamSequence seq(e.seeds[s], e.family, e.bounds);
    const Decomposition d = martingale_psi(seq, e.phi, e.k_trunc, e.n_bins, e.depth, e.options);
    out.per_seed[s] = d.sigma2_fiber;
    out.residuals[s] = d.residual;
    phi_l2[s] = d.phi_l2;
  });
  const numeric::MeanSe ms = numeric::mean_se(out.per_seed);
  out.sigma2 = ms.mean;
  out.std_err = ms.std_err;
  out.phi_l2 = numeric::mean_se(phi_l2).mean;
  return out;
}

std::vector<double> cumulative(const GridDensity& rho) {
  std::vector<double> cdf(rho.mass.size());
  double s = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    s += std::max(0.0, rho.mass[i]);
    cdf[i] = s;
  }
  for (double& c : cdf) c /= s;
  cdf.back() = 1.0;
  return cdf;
}

double sample_from(const GridDensity& rho, std::span<const double> cdf, double u_bin, double u_inner) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u_bin);
  const auto bin = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  const double n = static_cast<double>(rho.mass.size());
  return std::min((static_cast<double>(bin) + u_inner) / n, 1.0);
}

CoboundaryVerdict coboundary_test(const Ensemble& e, const SigmaEstimate& estimate, std::int64_t pointwise_samples,
                                  int orbit_length, std::uint64_t sample_seed) {
  CoboundaryVerdict v;
  v.sigma2 = estimate.sigma2;
  v.std_err = estimate.std_err;
  const double modulus = e.phi.holder_constant() * std::pow(static_cast<double>(e.n_bins), -e.phi.holder_exponent());
  v.resolution_floor = modulus * modulus;
  v.threshold = 3.0 * estimate.std_err + v.resolution_floor;
  v.degenerate = estimate.sigma2 < v.threshold || estimate.sigma2 == 0.0;
  if (!v.degenerate || e.seeds.empty() || pointwise_samples <= 0 || orbit_length < 1) return v;

  const omega::ParamSequence seq(e.seeds.front(), e.family, e.bounds);
  const DecompositionChain chain(seq, e.phi, e.k_trunc, e.n_bins, e.depth, orbit_length - 1, e.options);
  const std::vector<double> cdf = cumulative(chain.h(0));
  // Centering constant of phi_t: bin average minus its centered version.
  std::vector<double> centers;
  for (std::int64_t t = 0; t <= orbit_length; ++t) {
    const transfer::GridFunction avg =
        transfer::bin_average(e.phi, maps::fiber(seq, t), e.n_bins, e.options.subsamples);
    centers.push_back(avg.values[0] - chain.phi(t)[0]);
  }

  SplitMix64 rng(derive_key(sample_seed == 0 ? e.seeds.front() : sample_seed, stream::pointwise));
  double total = 0.0;
  double worst = 0.0;
  std::int64_t count = 0;
  for (std::int64_t s = 0; s < pointwise_samples; ++s) {
    double x = sample_from(chain.h(0), cdf, rng.uniform(), rng.uniform());
    for (int t = 0; t < orbit_length; ++t) {
      const double x_next = maps::apply(maps::fiber(seq, t), x);
      const double phi_next = e.phi(x_next, maps::fiber(seq, t + 1)) - centers[static_cast<std::size_t>(t) + 1];
      const double r = phi_next - DecompositionChain::lookup(chain.g(t + 1), x_next) +
                       DecompositionChain::lookup(chain.g(t), x);
      total += std::fabs(r);
      worst = std::max(worst, std::fabs(r));
      ++count;
      x = x_next;
    }
  }
  v.pointwise_residual = total / static_cast<double>(count);
  v.pointwise_max = worst;
  return v;
}

}  // namespace quenched::decomp
