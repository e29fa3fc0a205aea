#include "quenched/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "quenched/decomp.hpp"
#include "quenched/numeric.hpp"
#include "quenched/rng.hpp"
#include "quenched/transfer.hpp"

namespace quenched::stats {

std::vector<double> BirkhoffEnsemble::column(std::int64_t k) const {
  std::vector<double> out(static_cast<std::size_t>(n_samples));
  for (std::int64_t s = 0; s < n_samples; ++s) out[static_cast<std::size_t>(s)] = at(s, k);
  return out;
}

namespace {

constexpr std::int64_t kChunk = 512;

// Box-Muller pairs from a SplitMix64 stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key) : rng_(key) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform_open0();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }
  SplitMix64& engine() { return rng_; }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void check_ensemble(const BirkhoffEnsemble& ens) {
  if (ens.n_samples < 2 || ens.n_steps < 1) throw std::invalid_argument("ensemble needs >= 2 samples and >= 1 step");
}

double normalized(const BirkhoffEnsemble& ens, std::int64_t s, std::int64_t k, std::int64_t n, double sigma) {
  return ens.at(s, k) / (sigma * std::sqrt(static_cast<double>(n)));
}

}  // namespace

BirkhoffEnsemble birkhoff_ensemble(const omega::ParamSequence& seq, const maps::Observable& phi,
                                   std::int64_t n_steps, std::int64_t n_samples, Sampling sampling,
                                   const EnsembleOptions& options) {
  if (n_steps < 1) throw std::invalid_argument("birkhoff_ensemble: n_steps must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("birkhoff_ensemble: n_samples must be >= 1");
  BirkhoffEnsemble ens;
  ens.omega_seed = seq.master_seed();
  ens.n_steps = n_steps;
  ens.n_samples = n_samples;
  ens.sampling = sampling;
  const auto width = static_cast<std::size_t>(n_steps + 1);

  // Fiberwise centering constants against the grid densities h_k.
  const bool lsv = seq.family() == Family::lsv;
  const bool per_fiber = phi.depends_on_fiber() && lsv;
  transfer::DensityStream stream(seq, options.n_bins, options.depth, 0, options.subsamples);
  const transfer::GridDensity h0 = stream.density();
  std::vector<double> shared;
  if (!per_fiber) shared = transfer::bin_average(phi, maps::fiber(seq, 0), options.n_bins, options.subsamples).values;
  ens.centers.resize(width);
  for (std::int64_t k = 0; k <= n_steps; ++k) {
    if (per_fiber) {
      const auto values = transfer::bin_average(phi, maps::fiber(seq, k), options.n_bins, options.subsamples);
      ens.centers[static_cast<std::size_t>(k)] = transfer::integrate(values.values, stream.density());
    } else {
      ens.centers[static_cast<std::size_t>(k)] = transfer::integrate(shared, stream.density());
    }
    if (k < n_steps) stream.advance();
  }

  const std::vector<double> cdf = decomp::cumulative(h0);
  const std::vector<double> alphas = seq.params(0, width);
  const std::uint64_t sample_seed = options.sample_seed != 0 ? options.sample_seed : seq.master_seed();
  ens.S.assign(static_cast<std::size_t>(n_samples) * width, 0.0);

  const auto chunks = static_cast<std::size_t>((n_samples + kChunk - 1) / kChunk);
  const int threads = options.threads > 0 ? options.threads : numeric::default_threads();
  numeric::parallel_for(chunks, threads, [&](std::size_t c) {
    const std::int64_t first = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t count = std::min(kChunk, n_samples - first);
    std::vector<double> x(static_cast<std::size_t>(count));
    std::vector<std::uint64_t> window(static_cast<std::size_t>(count));
    std::vector<std::uint64_t> keys(static_cast<std::size_t>(count));
    for (std::int64_t j = 0; j < count; ++j) {
      const std::uint64_t key = derive_key(sample_seed, stream::birkhoff, static_cast<std::uint64_t>(first + j));
      keys[static_cast<std::size_t>(j)] = key;
      const double u1 = to_unit(counter_hash(key, 0));
      const double u2 = to_unit(counter_hash(key, 1));
      const double x0 = sampling == Sampling::equivariant ? decomp::sample_from(h0, cdf, u1, u2) : u1;
      x[static_cast<std::size_t>(j)] = x0;
      if (!lsv) {
        // Top 53 digits from the sampled point, the rest drawn fresh.
        const auto top = static_cast<std::uint64_t>(std::min(x0, std::nextafter(1.0, 0.0)) * 0x1.0p53);
        window[static_cast<std::size_t>(j)] = (top << 11) | (counter_hash(key, 2) >> 53);
      }
    }

    for (std::int64_t k = 1; k <= n_steps; ++k) {
      const maps::FiberMap map{seq.family(), alphas[static_cast<std::size_t>(k - 1)]};
      const maps::FiberMap next{seq.family(), alphas[static_cast<std::size_t>(k)]};
      if (lsv) {
        maps::apply_batch(map, x, x);
      } else {
        const auto word = static_cast<std::uint64_t>(3 + (k - 1) / 64);
        const int bit = static_cast<int>((k - 1) % 64);
        for (std::size_t j = 0; j < x.size(); ++j) {
          const std::uint64_t fresh = (counter_hash(keys[j], word) >> bit) & 1U;
          window[j] = (window[j] << 1) | fresh;
          x[j] = static_cast<double>(window[j] >> 11) * 0x1.0p-53;
        }
      }
      const double center = ens.centers[static_cast<std::size_t>(k)];
      for (std::int64_t j = 0; j < count; ++j) {
        const std::size_t row = static_cast<std::size_t>(first + j) * width;
        const auto kk = static_cast<std::size_t>(k);
        ens.S[row + kk] = ens.S[row + kk - 1] + (phi(x[static_cast<std::size_t>(j)], next) - center);
      }
    }
  });
  return ens;
}

BirkhoffEnsemble synthetic_ensemble(std::uint64_t seed, std::int64_t n_steps, std::int64_t n_samples, double sigma) {
  if (n_steps < 1 || n_samples < 1) throw std::invalid_argument("synthetic_ensemble: empty ensemble");
  BirkhoffEnsemble ens;
  ens.omega_seed = seed;
  ens.n_steps = n_steps;
  ens.n_samples = n_samples;
  ens.sampling = Sampling::lebesgue;
  const auto width = static_cast<std::size_t>(n_steps + 1);
  ens.centers.assign(width, 0.0);
  ens.S.assign(static_cast<std::size_t>(n_samples) * width, 0.0);
  for (std::int64_t s = 0; s < n_samples; ++s) {
    NormalStream normal(derive_key(seed, stream::synthetic, static_cast<std::uint64_t>(s)));
    const std::size_t row = static_cast<std::size_t>(s) * width;
    for (std::size_t k = 1; k < width; ++k) ens.S[row + k] = ens.S[row + k - 1] + sigma * normal();
  }
  return ens;
}

std::vector<VarianceRow> variance_growth(const BirkhoffEnsemble& ens, const VarianceOptions& options) {
  check_ensemble(ens);
  std::vector<std::int64_t> grid = options.grid;
  if (grid.empty()) {
    for (std::int64_t n = 1; n <= ens.n_steps; n *= 2) grid.push_back(n);
    if (grid.back() != ens.n_steps) grid.push_back(ens.n_steps);
  }
  for (std::int64_t n : grid)
    if (n < 1 || n > ens.n_steps) throw std::invalid_argument("variance_growth: grid point outside [1, n_steps]");

  const auto samples = static_cast<std::size_t>(ens.n_samples);
  std::vector<std::vector<double>> columns;
  for (std::int64_t n : grid) columns.push_back(ens.column(n));

  std::vector<VarianceRow> rows;
  for (std::size_t g = 0; g < grid.size(); ++g)
    rows.push_back({grid[g], numeric::sample_variance(columns[g]) / static_cast<double>(grid[g]), 0.0, 0.0});
  if (options.bootstrap <= 0) return rows;

  std::vector<std::vector<double>> boot(grid.size(), std::vector<double>(static_cast<std::size_t>(options.bootstrap)));
  std::vector<std::size_t> idx(samples);
  std::vector<double> resample(samples);
  for (int b = 0; b < options.bootstrap; ++b) {
    SplitMix64 rng(derive_key(options.seed, stream::bootstrap, static_cast<std::uint64_t>(b)));
    for (auto& i : idx) i = static_cast<std::size_t>(rng() % samples);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (std::size_t i = 0; i < samples; ++i) resample[i] = columns[g][idx[i]];
      boot[g][static_cast<std::size_t>(b)] = numeric::sample_variance(resample) / static_cast<double>(grid[g]);
    }
  }
  const double tail = 0.5 * (1.0 - options.level);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::sort(boot[g].begin(), boot[g].end());
    rows[g].ci_lo = numeric::quantile_sorted(boot[g], tail);
    rows[g].ci_hi = numeric::quantile_sorted(boot[g], 1.0 - tail);
  }
  return rows;
}

KsResult qclt_test(const BirkhoffEnsemble& ens, double sigma2, std::int64_t n) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("qclt_test: sigma^2 must be positive (degenerate case)");
  check_ensemble(ens);
  if (n == 0) n = ens.n_steps;
  if (n < 1 || n > ens.n_steps) throw std::invalid_argument("qclt_test: n outside [1, n_steps]");
  const double sigma = std::sqrt(sigma2);
  std::vector<double> z(static_cast<std::size_t>(ens.n_samples));
  for (std::int64_t s = 0; s < ens.n_samples; ++s) z[static_cast<std::size_t>(s)] = normalized(ens, s, n, n, sigma);
  KsResult out;
  out.statistic = numeric::ks_distance(std::move(z), numeric::normal_cdf);
  out.p_value = numeric::ks_pvalue(out.statistic, static_cast<double>(ens.n_samples));
  out.n = n;
  out.samples = ens.n_samples;
  return out;
}

CalibrationResult qclt_calibration(std::uint64_t seed, int repetitions, std::int64_t n_steps, std::int64_t n_samples,
                                   double level) {
  CalibrationResult out;
  out.repetitions = repetitions;
  for (int r = 0; r < repetitions; ++r) {
    const BirkhoffEnsemble ens =
        synthetic_ensemble(derive_key(seed, stream::synthetic, static_cast<std::uint64_t>(r)), n_steps, n_samples, 1.0);
    if (qclt_test(ens, 1.0).p_value < level) ++out.rejections;
  }
  out.rejection_rate = repetitions > 0 ? static_cast<double>(out.rejections) / repetitions : 0.0;
  return out;
}

LilResult qlil_envelope(const BirkhoffEnsemble& ens, double sigma2, double c) {
  check_ensemble(ens);
  if (ens.n_steps < kLilMinN) throw std::invalid_argument("qlil_envelope: need n_steps >= 16");
  if (!(c > 0.0)) throw std::invalid_argument("qlil_envelope: normalization constant must be positive");
  LilResult out;
  out.c = c;
  out.sigma = std::sqrt(std::max(0.0, sigma2));
  std::vector<double> scale(static_cast<std::size_t>(ens.n_steps + 1), 0.0);
  for (std::int64_t k = kLilMinN; k <= ens.n_steps; ++k) {
    const auto kd = static_cast<double>(k);
    scale[static_cast<std::size_t>(k)] = 1.0 / std::sqrt(c * kd * std::log(std::log(kd)));
  }
  for (std::int64_t s = 0; s < ens.n_samples; ++s) {
    const auto path = ens.path(s);
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::int64_t k = kLilMinN; k <= ens.n_steps; ++k) {
      const double v = path[static_cast<std::size_t>(k)] * scale[static_cast<std::size_t>(k)];
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    out.per_sample_max.push_back(hi);
    out.per_sample_min.push_back(lo);
  }
  std::vector<double> sorted = out.per_sample_max;
  std::sort(sorted.begin(), sorted.end());
  out.median_max = numeric::quantile_sorted(sorted, 0.5);
  out.iqr_max = numeric::quantile_sorted(sorted, 0.75) - numeric::quantile_sorted(sorted, 0.25);
  sorted = out.per_sample_min;
  std::sort(sorted.begin(), sorted.end());
  out.median_min = numeric::quantile_sorted(sorted, 0.5);
  return out;
}

const char* functional_name(Functional f) {
  switch (f) {
    case Functional::sup:
      return "sup";
    case Functional::sup_abs:
      return "sup_abs";
    case Functional::terminal:
      return "terminal";
  }
  return "unknown";
}

Functional parse_functional(std::string_view name) {
  if (name == "sup") return Functional::sup;
  if (name == "sup_abs") return Functional::sup_abs;
  if (name == "terminal") return Functional::terminal;
  throw std::invalid_argument("unknown functional '" + std::string(name) + "'");
}

double brownian_cdf(Functional f, double a) {
  switch (f) {
    case Functional::terminal:
      return numeric::normal_cdf(a);
    case Functional::sup:
      return a <= 0.0 ? 0.0 : 2.0 * numeric::normal_cdf(a) - 1.0;
    case Functional::sup_abs: {
      if (a <= 0.0) return 0.0;
      double sum = 0.0;
      if (a < 1.0) {
        // Theta-function series, fast for small a.
        for (int k = 0; k < 100; ++k) {
          const double m = 2.0 * k + 1.0;
          const double term = std::exp(-std::numbers::pi * std::numbers::pi * m * m / (8.0 * a * a)) / m;
          sum += (k % 2 == 0 ? term : -term);
          if (term < 1e-18) break;
        }
        return std::clamp(4.0 / std::numbers::pi * sum, 0.0, 1.0);
      }
      // Reflection series sum_k (-1)^k [Phi((2k+1)a) - Phi((2k-1)a)].
      for (int k = -20; k <= 20; ++k) {
        const double term = numeric::normal_cdf((2.0 * k + 1.0) * a) - numeric::normal_cdf((2.0 * k - 1.0) * a);
        sum += (k % 2 == 0 ? term : -term);
      }
      return std::clamp(sum, 0.0, 1.0);
    }
  }
  return 0.0;
}

const std::vector<double>& BrownianOracle::values(Functional f) const {
  switch (f) {
    case Functional::sup:
      return sup;
    case Functional::sup_abs:
      return sup_abs;
    case Functional::terminal:
      break;
  }
  return terminal;
}

const BrownianOracle& brownian_oracle(std::int64_t paths, std::int64_t steps, std::uint64_t seed, int threads) {
  using Key = std::tuple<std::int64_t, std::int64_t, std::uint64_t>;
  static std::mutex mutex;
  static std::map<Key, std::unique_ptr<BrownianOracle>> cache;
  if (paths < 1 || steps < 1) throw std::invalid_argument("brownian_oracle: need paths >= 1 and steps >= 1");
  std::lock_guard lock(mutex);
  const Key key{paths, steps, seed};
  if (auto it = cache.find(key); it != cache.end()) return *it->second;

  auto oracle = std::make_unique<BrownianOracle>();
  oracle->paths = paths;
  oracle->steps = steps;
  oracle->sup.resize(static_cast<std::size_t>(paths));
  oracle->sup_abs.resize(static_cast<std::size_t>(paths));
  oracle->terminal.resize(static_cast<std::size_t>(paths));
  const double dt = 1.0 / static_cast<double>(steps);
  const double sd = std::sqrt(dt);
  numeric::parallel_for(static_cast<std::size_t>(paths), threads > 0 ? threads : numeric::default_threads(),
                        [&](std::size_t p) {
                          NormalStream normal(derive_key(seed, stream::brownian, p));
                          double b = 0.0;
                          double hi = 0.0;
                          double lo = 0.0;
                          for (std::int64_t k = 0; k < steps; ++k) {
                            const double a = b;
                            b = a + sd * normal();
                            // Extremes of the Brownian bridge from a to b over one step.
                            const double d2 = (b - a) * (b - a);
                            const double up = std::sqrt(d2 - 2.0 * dt * std::log(normal.engine().uniform_open0()));
                            const double down = std::sqrt(d2 - 2.0 * dt * std::log(normal.engine().uniform_open0()));
                            hi = std::max(hi, 0.5 * (a + b + up));
                            lo = std::min(lo, 0.5 * (a + b - down));
                          }
                          oracle->sup[p] = hi;
                          oracle->sup_abs[p] = std::max(hi, -lo);
                          oracle->terminal[p] = b;
                        });
  return *cache.emplace(key, std::move(oracle)).first->second;
}

FcltResult qfclt_paths(const BirkhoffEnsemble& ens, double sigma2, Functional functional,
                       const BrownianOracle& oracle) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("qfclt_paths: sigma^2 must be positive");
  check_ensemble(ens);
  const double sigma = std::sqrt(sigma2);
  const std::int64_t n = ens.n_steps;
  FcltResult out;
  out.functional = functional;
  out.values.resize(static_cast<std::size_t>(ens.n_samples));
  for (std::int64_t s = 0; s < ens.n_samples; ++s) {
    double v = 0.0;
    switch (functional) {
      case Functional::terminal:
        v = normalized(ens, s, n, n, sigma);
        break;
      case Functional::sup:
        for (std::int64_t k = 0; k <= n; ++k) v = std::max(v, normalized(ens, s, k, n, sigma));
        break;
      case Functional::sup_abs:
        for (std::int64_t k = 0; k <= n; ++k) v = std::max(v, std::fabs(normalized(ens, s, k, n, sigma)));
        break;
    }
    out.values[static_cast<std::size_t>(s)] = v;
  }
  out.ks_brownian = numeric::ks_distance_two_sample(out.values, oracle.values(functional));
  if (functional == Functional::terminal)
    out.ks_exact = numeric::ks_distance(out.values, numeric::normal_cdf);
  else
    out.ks_exact = numeric::ks_distance(out.values, [functional](double a) { return brownian_cdf(functional, a); });
  out.p_value = numeric::ks_pvalue(out.ks_exact, static_cast<double>(ens.n_samples));
  return out;
}

RateResult asip_rate(const RateParams& params) {
  RateResult out;
  if (params.exponential) {
    if (!(params.a > 0.0)) throw std::invalid_argument("inadmissible: exponential tail needs a > 0");
    if (!(params.b > 0.0 && params.b <= 1.0)) throw std::invalid_argument("inadmissible: exponential tail needs b in (0, 1]");
    out.arbitrarily_small = true;
    out.epsilon_0_lo = 0.0;
    return out;
  }
  const bool p_inf = std::isinf(params.p) && params.p > 0.0;
  if (!p_inf && !(params.p > 1.0)) throw std::invalid_argument("inadmissible: p must exceed 1");
  const double bound = p_inf ? 6.0 : 2.0 + 4.0 * params.p / (params.p - 1.0);
  if (!(std::isfinite(params.D) && params.D > bound)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "inadmissible: D = %.17g must exceed 2 + 4p/(p-1) = %.17g", params.D, bound);
    throw std::invalid_argument(buf);
  }
  const double e1 = p_inf ? 2.0 / (params.D - 2.0) : 2.0 * params.p / ((params.p - 1.0) * (params.D - 2.0));
  const double first = 0.25 + (3.0 * e1 - 2.0 * e1 * e1 * e1 - e1 * e1) / 4.0;
  const double third = (1.0 + e1) / 4.0;
  out.epsilon_1 = e1;
  out.epsilon_D = std::max({first, e1, third}) - 0.25;
  out.epsilon_0_lo = out.epsilon_D;
  return out;
}

}  // namespace quenched::stats
